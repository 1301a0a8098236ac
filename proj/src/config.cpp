#include "mmce/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mmce {

uint64_t fnv1a_bytes(const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t hash = 1469598103934665603ULL;
  for (size_t i = 0; i < n; ++i) {
    hash ^= p[i];
    hash *= 1099511628211ULL;
  }
  return hash;
}

namespace {

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for '" + key + "': " + v);
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for '" + key + "': " + v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ConfigError("config: bad boolean for '" + key + "': " + v);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(v);
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

}  // namespace

void ExperimentConfig::apply(const std::string& key, const std::string& value) {
  if (key == "nt") n_t = to_int(key, value);
  else if (key == "nr") n_r = to_int(key, value);
  else if (key == "lt") l_t = to_int(key, value);
  else if (key == "lr") l_r = to_int(key, value);
  else if (key == "k") k = to_int(key, value);
  else if (key == "kp") k_p = to_int(key, value);
  else if (key == "gt") g_t = to_int(key, value);
  else if (key == "gr") g_r = to_int(key, value);
  else if (key == "gtr") g_t_r = to_int(key, value);
  else if (key == "grr") g_r_r = to_int(key, value);
  else if (key == "l") l = to_int(key, value);
  else if (key == "nc") n_c = to_int(key, value);
  else if (key == "nq") n_q = to_int(key, value);
  else if (key == "rolloff") rolloff = to_double(key, value);
  else if (key == "ts") ts = to_double(key, value);
  else if (key == "m") {
    m_list.clear();
    for (const auto& s : split_list(value)) m_list.push_back(to_int(key, s));
  } else if (key == "snr") {
    snr_db.clear();
    for (const auto& s : split_list(value)) snr_db.push_back(to_double(key, s));
  } else if (key == "trials") trials = to_int(key, value);
  else if (key == "seed") seed = static_cast<uint64_t>(std::stoull(value));
  else if (key == "estimators") estimators = split_list(value);
  else if (key == "weights") weights = value;
  else if (key == "eps-mult") eps_mult = to_double(key, value);
  else if (key == "ns") n_s = to_int(key, value);
  else if (key == "on-grid") on_grid = to_bool(key, value);
  else if (key == "dataset-size") dataset_size = to_int(key, value);
  else if (key == "split") split = to_double(key, value);
  else if (key == "learning-rate") lr = to_double(key, value);
  else if (key == "epochs") epochs = to_int(key, value);
  else if (key == "batch") batch = to_int(key, value);
  else if (key == "patience") patience = to_int(key, value);
  else if (key == "threads") threads = to_int(key, value);
  else throw ConfigError("config: unknown key '" + key + "'");
}

void ExperimentConfig::validate() const {
  if (n_t < 1 || n_r < 1) throw ConfigError("config: antenna counts must be >= 1");
  if (l_t < 1 || l_r < 1 || l_t >= n_t || l_r >= n_r)
    throw ConfigError("config: RF chains must satisfy 1 <= L_t < N_t and 1 <= L_r < N_r");
  if (k < 1 || k_p < 1 || k_p > k) throw ConfigError("config: need 1 <= K_p <= K");
  if (g_t < n_t || g_r < n_r)
    throw ConfigError("config: detection grids must be at least the antenna counts");
  if (g_t_r < g_t || g_r_r < g_r || g_t_r % g_t != 0 || g_r_r % g_r != 0)
    throw ConfigError("config: refinement grids must be integer multiples of the detection grids");
  if (l < 1 || n_c < 1) throw ConfigError("config: need L >= 1 and N_c >= 1");
  if (n_q < 1) throw ConfigError("config: N_Q must be >= 1");
  if (rolloff < 0.0 || rolloff > 1.0) throw ConfigError("config: rolloff must be in [0, 1]");
  if (m_list.empty() || snr_db.empty()) throw ConfigError("config: M list and SNR grid must be nonempty");
  for (int m : m_list)
    if (m < 1) throw ConfigError("config: frame counts must be >= 1");
  if (trials < 1) throw ConfigError("config: trials must be >= 1");
  if (estimators.empty()) throw ConfigError("config: estimator set must be nonempty");
  for (const auto& e : estimators)
    if (e != "swomp" && e != "cnn-cs" && e != "cnn-cs-refined" && e != "perfect")
      throw ConfigError("config: unknown estimator '" + e + "'");
  if (eps_mult <= 0.0) throw ConfigError("config: eps-mult must be positive");
  if (n_s < 1 || n_s > std::min(n_t, n_r)) throw ConfigError("config: bad N_s");
  if (dataset_size < 1) throw ConfigError("config: dataset-size must be >= 1");
  if (split <= 0.0 || split >= 1.0) throw ConfigError("config: split must be in (0, 1)");
  if (epochs < 0 || batch < 1 || patience < 0) throw ConfigError("config: bad training settings");
  if (threads < 1) throw ConfigError("config: threads must be >= 1");
}

std::string ExperimentConfig::echo() const {
  std::ostringstream os;
  os << "nt=" << n_t << "\nnr=" << n_r << "\nlt=" << l_t << "\nlr=" << l_r
     << "\nk=" << k << "\nkp=" << k_p << "\ngt=" << g_t << "\ngr=" << g_r
     << "\ngtr=" << g_t_r << "\ngrr=" << g_r_r << "\nl=" << l << "\nnc=" << n_c
     << "\nnq=" << n_q << "\nrolloff=" << fmt(rolloff) << "\nts=" << fmt(ts) << "\nm=";
  for (size_t i = 0; i < m_list.size(); ++i) os << (i ? "," : "") << m_list[i];
  os << "\nsnr=";
  for (size_t i = 0; i < snr_db.size(); ++i) os << (i ? "," : "") << fmt(snr_db[i]);
  os << "\ntrials=" << trials << "\nseed=" << seed << "\nestimators=";
  for (size_t i = 0; i < estimators.size(); ++i) os << (i ? "," : "") << estimators[i];
  os << "\nweights=" << weights << "\neps-mult=" << fmt(eps_mult) << "\nns=" << n_s
     << "\non-grid=" << (on_grid ? 1 : 0) << "\ndataset-size=" << dataset_size
     << "\nsplit=" << fmt(split) << "\nlearning-rate=" << fmt(lr) << "\nepochs=" << epochs
     << "\nbatch=" << batch << "\npatience=" << patience << "\nthreads=" << threads << "\n";
  return os.str();
}

std::string ExperimentConfig::hash() const {
  const std::string e = echo();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a_bytes(e.data(), e.size())));
  return buf;
}

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: missing '=' at " + path + ":" + std::to_string(lineno));
    auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    base.apply(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
  return base;
}

}  // namespace mmce
