#pragma once

#include <vector>

#include "mmce/rng.hpp"
#include "mmce/types.hpp"

namespace mmce {

// One propagation path of the geometric channel model.
struct Path {
  cxd alpha;   // complex gain
  double tau;  // delay, seconds
  double aoa;  // angle of arrival, radians in [0, pi]
  double aod;  // angle of departure, radians in [0, pi]
};

struct PathSet {
  std::vector<Path> paths;
  double rho_l = 1.0;  // path loss, linear
  double ts = 1.0;     // sampling period, seconds
  int nc = 0;          // delay-tap count
  double rolloff = 0.8;

  int l() const { return static_cast<int>(paths.size()); }
};

// Time-domain channel: nc taps, each n_r x n_t.
struct ChannelTaps {
  std::vector<MatrixXcd> taps;
};

// Per-subcarrier channel matrices H[k], k = 0..K-1.
struct FreqChannel {
  std::vector<MatrixXcd> h;

  int k() const { return static_cast<int>(h.size()); }
  int n_r() const { return h.empty() ? 0 : static_cast<int>(h[0].rows()); }
  int n_t() const { return h.empty() ? 0 : static_cast<int>(h[0].cols()); }
};

// Steering dictionaries evaluated on uniform angle grids over [0, 2*pi).
// Because cos(2*pi - x) == cos(x), grid columns i and G - i hold identical
// steering vectors; the builder evaluates the cosine symmetrically so the
// duplicates are bitwise equal and index ties resolve deterministically.
struct Dictionary {
  MatrixXcd a_rx;      // N_r x G_r
  MatrixXcd a_tx;      // N_t x G_t
  VectorXd grid_aoa;   // G_r angles
  VectorXd grid_aod;   // G_t angles

  int g_r() const { return static_cast<int>(a_rx.cols()); }
  int g_t() const { return static_cast<int>(a_tx.cols()); }
  int n_r() const { return static_cast<int>(a_rx.rows()); }
  int n_t() const { return static_cast<int>(a_tx.rows()); }
};

// Amplitude labels |Delta_v[k]|, one G_r x G_t image per subcarrier.
struct VirtualLabel {
  std::vector<MatrixXd> g;
};

// Exact sparse frequency-domain virtual-channel gains of an on-grid PathSet.
struct VirtualGains {
  std::vector<int> support;  // linear cell indices, column-major, one per distinct cell
  MatrixXcd gains;           // |support| x K complex gains
  int g_r = 0, g_t = 0;
};

// Element n = (1/sqrt(N)) * exp(j*n*pi*cos(angle)), half-wavelength ULA.
VectorXcd steering_vector(double angle, int n);

// Raised-cosine impulse response; removable singularities handled in closed form.
double raised_cosine(double t, double rolloff, double ts);

Dictionary build_dictionary(int n_t, int n_r, int g_t, int g_r);

// Refinement grids must be integer multiples of the detection grids so that
// detection cells map exactly onto refined cells.
Dictionary refine_dictionary(const Dictionary& base, int factor);

// Gains ~ CN(0,1), delays ~ U[0, (nc-1)*ts], angles ~ U(0, pi); when on_grid
// is set the angles snap to the nearest dictionary grid point (training
// labels need an exact sparse representation).
PathSet sample_paths(Rng& rng, int l, int nc, double ts, bool on_grid,
                     const Dictionary* dict = nullptr, double rolloff = 0.8);

ChannelTaps channel_taps(const PathSet& paths, int n_t, int n_r);

FreqChannel channel_freq(const ChannelTaps& taps, int k);

// channel_freq(channel_taps(...)) in one step.
FreqChannel make_channel(const PathSet& paths, int n_t, int n_r, int k);

// Exact virtual-channel gains for an on-grid PathSet; throws ConfigError when
// any angle is off-grid. Gains of paths snapped to the same cell accumulate.
VirtualGains virtual_gains(const PathSet& paths, const Dictionary& dict, int k);

VirtualLabel virtual_label(const PathSet& paths, const Dictionary& dict, int k);

// Canonical support cells of an on-grid PathSet (sorted ascending).
std::vector<int> true_support(const PathSet& paths, const Dictionary& dict);

// Snap an on-grid PathSet onto a refinement of the same grid.
std::vector<int> true_support_refined(const PathSet& paths, const Dictionary& coarse,
                                      const Dictionary& refined);

// Nearest grid cells of a (possibly off-grid) PathSet, sorted and deduplicated.
std::vector<int> nearest_support(const PathSet& paths, const Dictionary& dict);

}  // namespace mmce
