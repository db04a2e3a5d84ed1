#pragma once
// Helpers shared by the unit tests and the acceptance binary.

#include <string>

#include "cipherprint/nist.hpp"

namespace cptest {

// Leading n binary digits of e (starting "10.1011..."), computed with GMP by binary splitting.
const cipherprint::nist::Bits& e_bits(std::size_t n = 1000000);

// Fresh empty directory under the system temp dir.
std::string temp_dir(const std::string& tag);

}  // namespace cptest
