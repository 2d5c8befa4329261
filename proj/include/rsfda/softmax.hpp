#pragma once

#include <vector>

#include "rsfda/tensor.hpp"

namespace rsfda {

// Row-wise, max-shifted.
Tensor softmax(const Tensor& logits);
Tensor log_softmax(const Tensor& logits);

// Per-row argmax; exact ties resolve to the lowest index.
std::vector<int> argmax_rows(const Tensor& t);

}  // namespace rsfda
