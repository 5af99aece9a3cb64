// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CERTROM_SELFTEST_HPP
#define CERTROM_SELFTEST_HPP

#include <ostream>

namespace certrom::selftest
{

// Runs a fast battery of oracle checks against independent dense or brute-force computations
// and prints one line per check. Returns the number of failed checks.
int Run(std::ostream &out);

}  // namespace certrom::selftest

#endif  // CERTROM_SELFTEST_HPP
