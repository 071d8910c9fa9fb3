#pragma once

#include <gtest/gtest.h>

#include "reid/error.hpp"

namespace reid::testing {

/// The category of the Error thrown by f, failing the test if none is thrown.
template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a reid::Error";
  return ErrorCode::InvalidArgument;
}

}  // namespace reid::testing
