#pragma once

#include <string>
#include <vector>

#include "mmce/types.hpp"

namespace mmce {

// Full experiment description; field names double as config-file keys and CLI
// flag names. Defaults follow the reference simulation setup.
struct ExperimentConfig {
  int n_t = 16, n_r = 64;      // antennas
  int l_t = 2, l_r = 4;        // RF chains
  int k = 16;                  // subcarriers
  int k_p = 4;                 // subcarriers used for amplitude estimation
  int g_t = 32, g_r = 128;     // detection grids (2N)
  int g_t_r = 128, g_r_r = 512;  // refinement grids (8N)
  int l = 16;                  // channel paths
  int n_c = 16;                // delay taps
  int n_q = 2;                 // phase-quantization bits
  double rolloff = 0.8;
  double ts = 1.0;             // sampling period (only delay ratios matter)
  std::vector<int> m_list = {100};
  std::vector<double> snr_db = {-15, -10, -5, 0, 5};
  int trials = 50;
  uint64_t seed = 1;
  std::vector<std::string> estimators = {"swomp", "cnn-cs", "cnn-cs-refined", "perfect"};
  std::string weights;         // DnCNN weight file (required by the cnn estimators)
  double eps_mult = 1.0;       // stopping threshold = eps_mult * sigma^2
  int n_s = 2;                 // streams for the spectral-efficiency metric
  bool on_grid = false;        // snap evaluation channels onto the detection grid
  int dataset_size = 500;      // channel realizations per generated dataset
  double split = 0.7;
  double lr = 0.01;
  int epochs = 10;
  int batch = 256;
  int patience = 10;
  int threads = 1;

  void apply(const std::string& key, const std::string& value);
  void validate() const;
  std::string echo() const;          // canonical key=value dump
  std::string hash() const;          // FNV-1a of echo(), hex
};

// key=value lines, '#' comments, blank lines ignored.
ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base = {});

uint64_t fnv1a_bytes(const void* data, size_t n);

}  // namespace mmce
