#pragma once

#include "dac/models.hpp"

namespace dac::models::detail {

void balance_rows(Matrix& X, Vector& y, std::uint64_t seed);
void require_two_classes(const Vector& y);

}  // namespace dac::models::detail
