#include "azarnet/errors.hpp"

#include <cstdio>

namespace azarnet {

namespace {

std::string describe(int epoch, int batch, double value) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "non-finite loss %g at epoch %d, batch %d", value, epoch, batch);
  return buf;
}

}  // namespace

NonFiniteLossError::NonFiniteLossError(int epoch, int batch, double value)
    : Error(describe(epoch, batch, value)), epoch_(epoch), batch_(batch), value_(value) {}

}  // namespace azarnet
