#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "vbmi/epochs.hpp"

namespace vbmi::io {

// Flat binary matrix file: u64 rows, u64 cols, f64 fs_hz, then row-major
// little-endian doubles. Rows are channels, columns samples.
struct MatrixFile {
  Eigen::MatrixXd data;
  double fs_hz = 0.0;
};

void write_matrix(const std::string& path, const Eigen::MatrixXd& m, double fs_hz);
MatrixFile read_matrix(const std::string& path);

// Labeled epoch set: u32 n_epochs, u32 channels, u32 samples, f64 fs_hz, then
// per epoch {i32 label, u64 onset_sample, row-major doubles}.
struct EpochFile {
  std::vector<dsp::Epoch> epochs;
  double fs_hz = 0.0;
};

void write_epochs(const std::string& path, const std::vector<dsp::Epoch>& epochs, double fs_hz);
EpochFile read_epochs(const std::string& path);

}  // namespace vbmi::io
