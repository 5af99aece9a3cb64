// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#include "certrom/log.hpp"

#include <atomic>
#include <iostream>

namespace certrom::log
{

namespace
{

std::atomic<Level> threshold{Level::Warn};

const char *Name(Level level)
{
  switch (level)
  {
    case Level::Debug:
      return "debug";
    case Level::Info:
      return "info";
    case Level::Warn:
      return "warn";
    case Level::Error:
      return "error";
    default:
      return "";
  }
}

}  // namespace

void SetLevel(Level level) { threshold = level; }

Level GetLevel() { return threshold; }

void Write(Level level, std::string_view msg)
{
  if (level < threshold.load())
  {
    return;
  }
  std::cerr << "[certrom:" << Name(level) << "] " << msg << '\n';
}

}  // namespace certrom::log
