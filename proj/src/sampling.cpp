#include "v1net/sampling.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "v1net/rng.hpp"
#include "v1net/tensor.hpp"

namespace v1 {

namespace {

void check_probs(const std::vector<double>& p, const std::string& name) {
  double sum = 0.0;
  for (double x : p) {
    if (x < 0.0) throw std::runtime_error(name + ": negative probability");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::runtime_error(name + ": probabilities sum to " +
                             std::to_string(sum) + ", expected 1");
}

void check_edges(const std::vector<double>& e, double lo, double hi,
                 const std::string& name) {
  if (e.size() < 2) throw std::runtime_error(name + ": needs at least 2 edges");
  for (std::size_t i = 0; i + 1 < e.size(); ++i)
    if (e[i] >= e[i + 1]) throw std::runtime_error(name + ": edges not increasing");
  if (e.front() < lo - 1e-9 || e.back() > hi + 1e-9)
    throw std::runtime_error(name + ": edges outside allowed range");
}

int bin_of(double v, const std::vector<double>& edges) {
  // right-open, last bin right-closed
  const int nb = static_cast<int>(edges.size()) - 1;
  for (int i = 0; i < nb; ++i)
    if (v < edges[i + 1] || i == nb - 1) return i;
  return nb - 1;
}

double draw_in_bin(Rng& rng, const std::vector<double>& edges, int bin,
                   bool log_space) {
  if (log_space) {
    const double lo = std::log(edges[bin]), hi = std::log(edges[bin + 1]);
    return std::exp(rng.uniform(lo, hi));
  }
  return rng.uniform(edges[bin], edges[bin + 1]);
}

std::vector<ChannelDescriptor> assign_cell_types(
    std::vector<GaborParams> params, int n_simple, int n_complex) {
  std::vector<ChannelDescriptor> out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    out[i].cell_type = (static_cast<int>(i) < n_simple) ? CellType::Simple
                                                        : CellType::Complex;
    out[i].params = params[i];
    out[i].channel_index = static_cast<int>(i);
  }
  (void)n_complex;
  return out;
}

}  // namespace

void DistributionTable::validate() const {
  check_edges(orientation_edges, kThetaMin, kThetaMax, "orientation.edges");
  check_edges(sf_edges, kSfMin, kSfMax, "spatial_frequency.edges");
  check_edges(nx_edges, kNMin, kNMax, "size_joint.nx_edges");
  check_edges(ny_edges, kNMin, kNMax, "size_joint.ny_edges");
  if (orientation_probs.size() + 1 != orientation_edges.size())
    throw std::runtime_error("orientation.probs: length mismatch with edges");
  if (sf_probs.size() + 1 != sf_edges.size())
    throw std::runtime_error("spatial_frequency.probs: length mismatch with edges");
  check_probs(orientation_probs, "orientation.probs");
  check_probs(sf_probs, "spatial_frequency.probs");

  const std::size_t n_nx = nx_edges.size() - 1, n_ny = ny_edges.size() - 1;
  if (size_joint.size() != n_nx)
    throw std::runtime_error("size_joint.probs: row count mismatch with nx_edges");
  std::vector<double> flat;
  for (const auto& row : size_joint) {
    if (row.size() != n_ny)
      throw std::runtime_error("size_joint.probs: column count mismatch with ny_edges");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  check_probs(flat, "size_joint.probs");

  if (sf_size_coupling.size() != sf_probs.size())
    throw std::runtime_error("sf_size_coupling.probs: row count mismatch with sf bins");
  for (std::size_t i = 0; i < sf_size_coupling.size(); ++i) {
    if (sf_size_coupling[i].size() != n_nx)
      throw std::runtime_error("sf_size_coupling.probs: column count mismatch");
    check_probs(sf_size_coupling[i],
                "sf_size_coupling.probs[" + std::to_string(i) + "]");
  }
}

std::vector<ChannelDescriptor> sample_uniform(const SamplerConfig& config) {
  if (config.regime != SamplingRegime::Uniform)
    throw std::invalid_argument("sample_uniform: regime is not Uniform");
  Rng rng(config.seed);
  const int n = config.n_simple + config.n_complex;
  std::vector<GaborParams> params(n);
  for (auto& p : params) {
    p.theta = static_cast<float>(rng.uniform(kThetaMin, kThetaMax));
    if (config.log_sf)
      p.sf = static_cast<float>(
          std::exp(rng.uniform(std::log(kSfMin), std::log(kSfMax))));
    else
      p.sf = static_cast<float>(rng.uniform(kSfMin, kSfMax));
    p.phase = static_cast<float>(rng.uniform(0.0, 2.0 * M_PI));
    p.nx = static_cast<float>(rng.uniform(kNMin, kNMax));
    p.ny = static_cast<float>(rng.uniform(kNMin, kNMax));
  }
  return assign_cell_types(std::move(params), config.n_simple, config.n_complex);
}

std::vector<ChannelDescriptor> sample_biological(const SamplerConfig& config) {
  if (config.regime != SamplingRegime::Biological)
    throw std::invalid_argument("sample_biological: regime is not Biological");
  const DistributionTable& t = config.table;
  t.validate();
  Rng rng(config.seed);
  const int n = config.n_simple + config.n_complex;
  const std::size_t n_ny = t.ny_edges.size() - 1;
  std::vector<GaborParams> params(n);
  for (auto& p : params) {
    const int ori_bin = rng.categorical(t.orientation_probs);
    p.theta = static_cast<float>(draw_in_bin(rng, t.orientation_edges, ori_bin, false));

    const int sf_bin = rng.categorical(t.sf_probs);
    p.sf = static_cast<float>(draw_in_bin(rng, t.sf_edges, sf_bin, true));

    // nx bin conditioned on the sf bin, then ny conditioned on nx via the
    // joint size table.
    const int nx_bin = rng.categorical(t.sf_size_coupling[sf_bin]);
    std::vector<double> ny_cond(n_ny);
    double row_sum = 0.0;
    for (std::size_t j = 0; j < n_ny; ++j) row_sum += t.size_joint[nx_bin][j];
    for (std::size_t j = 0; j < n_ny; ++j)
      ny_cond[j] = (row_sum > 0.0) ? t.size_joint[nx_bin][j] / row_sum
                                   : 1.0 / static_cast<double>(n_ny);
    const int ny_bin = rng.categorical(ny_cond);

    p.nx = static_cast<float>(draw_in_bin(rng, t.nx_edges, nx_bin, false));
    p.ny = static_cast<float>(draw_in_bin(rng, t.ny_edges, ny_bin, false));
    p.phase = static_cast<float>(rng.uniform(0.0, 2.0 * M_PI));
  }
  return assign_cell_types(std::move(params), config.n_simple, config.n_complex);
}

namespace {

nlohmann::json table_to_json(const DistributionTable& t) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["orientation"] = {{"edges", t.orientation_edges}, {"probs", t.orientation_probs}};
  j["spatial_frequency"] = {{"edges", t.sf_edges}, {"probs", t.sf_probs}};
  j["size_joint"] = {{"nx_edges", t.nx_edges},
                     {"ny_edges", t.ny_edges},
                     {"probs", t.size_joint}};
  j["sf_size_coupling"] = {{"probs", t.sf_size_coupling}};
  return j;
}

}  // namespace

DistributionTable load_distribution_table(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("distribution table parse error: " +
                             std::string(e.what()));
  }
  if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1)
    throw std::runtime_error("distribution table: unrecognized schema_version");
  DistributionTable t;
  try {
    t.orientation_edges = j.at("orientation").at("edges").get<std::vector<double>>();
    t.orientation_probs = j.at("orientation").at("probs").get<std::vector<double>>();
    t.sf_edges = j.at("spatial_frequency").at("edges").get<std::vector<double>>();
    t.sf_probs = j.at("spatial_frequency").at("probs").get<std::vector<double>>();
    t.nx_edges = j.at("size_joint").at("nx_edges").get<std::vector<double>>();
    t.ny_edges = j.at("size_joint").at("ny_edges").get<std::vector<double>>();
    t.size_joint =
        j.at("size_joint").at("probs").get<std::vector<std::vector<double>>>();
    t.sf_size_coupling =
        j.at("sf_size_coupling").at("probs").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("distribution table: missing field: " +
                             std::string(e.what()));
  }
  t.validate();
  t.checksum = file_checksum(path);
  return t;
}

void save_distribution_table(const DistributionTable& table,
                             const std::filesystem::path& path) {
  table.validate();
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os << table_to_json(table).dump(2) << "\n";
}

std::filesystem::path default_table_path() {
  return std::filesystem::path(V1NET_DATA_DIR) / "bio_distribution.json";
}

}  // namespace v1
