#pragma once

#include <stdexcept>
#include <string>

namespace slidereg {

// Single exception type for the library; messages are user-facing.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace slidereg
