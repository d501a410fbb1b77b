#pragma once

#include "edgpat/tape.hpp"

namespace edgpat {

// Trainable sinusoidal interval encoding. For frequencies w and phases b
// (d_T/2 each) the output interleaves cos/sin pairs scaled by
// sqrt(1/(d_T/2)), so the result always has unit L2 norm:
//   out[2r]   = sqrt(1/(d_T/2)) * cos(w_r dt + b_r)
//   out[2r+1] = sqrt(1/(d_T/2)) * sin(w_r dt + b_r)
// Intervals are fed in days; callers convert from seconds.
Vec encode_interval(double dt, const Mat& w, const Mat& b);

// Log-spaced frequency ladder w_r = 10^(-9r / (d_T/2)), r = 1..d_T/2, with
// zero phases; spans day-scale up to effectively-constant components.
void init_time_encoder(ad::Tensor& w, ad::Tensor& b);

inline double seconds_to_days(double seconds) { return seconds / kSecondsPerDay; }

}  // namespace edgpat
