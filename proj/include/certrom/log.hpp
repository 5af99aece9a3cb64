// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CERTROM_LOG_HPP
#define CERTROM_LOG_HPP

#include <string_view>

namespace certrom::log
{

enum class Level
{
  Debug = 0,
  Info = 1,
  Warn = 2,
  Error = 3,
  Off = 4
};

void SetLevel(Level level);
Level GetLevel();

// Writes "[certrom:<level>] msg" to stderr when level passes the threshold.
void Write(Level level, std::string_view msg);
inline void Info(std::string_view msg) { Write(Level::Info, msg); }
inline void Warn(std::string_view msg) { Write(Level::Warn, msg); }

}  // namespace certrom::log

#endif  // CERTROM_LOG_HPP
