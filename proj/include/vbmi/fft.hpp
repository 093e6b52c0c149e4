#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace vbmi::dsp {

size_t next_power_of_two(size_t n);

// In-place iterative radix-2 FFT. Size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& x, bool inverse);

}  // namespace vbmi::dsp
