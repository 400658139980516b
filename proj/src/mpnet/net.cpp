#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "detail.hpp"
#include "radiomap/errors.hpp"
#include "radiomap/random.hpp"

namespace radiomap::mpnet {
namespace {

using nlohmann::json;

json encoder_json(const HashEncodingParams& p) {
  return {{"levels", p.levels},
          {"table_size", p.table_size},
          {"features_per_level", p.features_per_level},
          {"base_resolution", p.base_resolution},
          {"finest_resolution", p.finest_resolution},
          {"bounds_lo", {p.bounds_lo.x, p.bounds_lo.y, p.bounds_lo.z}},
          {"bounds_hi", {p.bounds_hi.x, p.bounds_hi.y, p.bounds_hi.z}}};
}

HashEncodingParams encoder_from(const json& j) {
  HashEncodingParams p;
  p.levels = j.value("levels", p.levels);
  p.table_size = j.value("table_size", p.table_size);
  p.features_per_level = j.value("features_per_level", p.features_per_level);
  p.base_resolution = j.value("base_resolution", p.base_resolution);
  p.finest_resolution = j.value("finest_resolution", p.finest_resolution);
  if (j.contains("bounds_lo")) {
    const auto v = j["bounds_lo"].get<std::vector<double>>();
    if (v.size() != 3) throw MalformedInput("bounds_lo must have 3 entries");
    p.bounds_lo = {v[0], v[1], v[2]};
  }
  if (j.contains("bounds_hi")) {
    const auto v = j["bounds_hi"].get<std::vector<double>>();
    if (v.size() != 3) throw MalformedInput("bounds_hi must have 3 entries");
    p.bounds_hi = {v[0], v[1], v[2]};
  }
  return p;
}

constexpr char kMagic[8] = {'R', 'M', 'A', 'P', 'M', 'P', 'N', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  void read(void* dst, std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size()) throw IncompatibleCheckpoint(std::string("checkpoint truncated in ") + what);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v = 0;
    read(&v, 4, what);
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    std::string s(n, '\0');
    read(s.data(), n, what);
    return s;
  }
  [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
void require_same(const std::string& field, const T& got, const T& want) {
  if (got != want) throw IncompatibleCheckpoint("checkpoint field " + field + " differs from the expected network");
}

void require_same_encoder(const std::string& name, const HashEncodingParams& a, const HashEncodingParams& b) {
  require_same(name + ".levels", a.levels, b.levels);
  require_same(name + ".table_size", a.table_size, b.table_size);
  require_same(name + ".features_per_level", a.features_per_level, b.features_per_level);
  require_same(name + ".base_resolution", a.base_resolution, b.base_resolution);
  require_same(name + ".finest_resolution", a.finest_resolution, b.finest_resolution);
  require_same(name + ".bounds_lo", a.bounds_lo, b.bounds_lo);
  require_same(name + ".bounds_hi", a.bounds_hi, b.bounds_hi);
}

}  // namespace

void validate(const NetConfig& cfg) {
  validate(cfg.tx_encoder);
  validate(cfg.rx_encoder);
  if (cfg.attenuation_hidden.empty() || cfg.radiance_hidden.empty()) {
    throw DomainError("net config: both MLPs need at least one hidden layer");
  }
  for (int w : cfg.attenuation_hidden)
    if (w < 1) throw DomainError("net config: layer widths must be positive");
  for (int w : cfg.radiance_hidden)
    if (w < 1) throw DomainError("net config: layer widths must be positive");
  if (cfg.feature_dim < 1) throw DomainError("net config: feature_dim must be positive");
}

json to_json(const NetConfig& cfg) {
  return {{"tx_encoder", encoder_json(cfg.tx_encoder)},
          {"rx_encoder", encoder_json(cfg.rx_encoder)},
          {"attenuation_hidden", cfg.attenuation_hidden},
          {"feature_dim", cfg.feature_dim},
          {"radiance_hidden", cfg.radiance_hidden},
          {"init_delta", cfg.init_delta},
          {"init_amplitude", cfg.init_amplitude},
          {"init_table_scale", cfg.init_table_scale},
          {"seed", cfg.seed}};
}

NetConfig net_config_from_json(const json& j) {
  NetConfig c;
  try {
    if (j.contains("tx_encoder")) c.tx_encoder = encoder_from(j["tx_encoder"]);
    if (j.contains("rx_encoder")) c.rx_encoder = encoder_from(j["rx_encoder"]);
    c.attenuation_hidden = j.value("attenuation_hidden", c.attenuation_hidden);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.radiance_hidden = j.value("radiance_hidden", c.radiance_hidden);
    c.init_delta = j.value("init_delta", c.init_delta);
    c.init_amplitude = j.value("init_amplitude", c.init_amplitude);
    c.init_table_scale = j.value("init_table_scale", c.init_table_scale);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw MalformedInput(std::string("net config: ") + e.what());
  }
  validate(c);
  return c;
}

void fit_bounds(NetConfig& cfg, const scene::OccupancyGrid& grid, double padding) {
  const Vec3 pad{padding, padding, padding};
  for (auto* e : {&cfg.tx_encoder, &cfg.rx_encoder}) {
    e->bounds_lo = grid.origin() - pad;
    e->bounds_hi = grid.upper_corner() + pad;
  }
}

MultipathNet::MultipathNet(const NetConfig& cfg) : cfg_(cfg) {
  validate(cfg_);
  const auto& te = cfg_.tx_encoder;
  const auto& re = cfg_.rx_encoder;
  add_tensor("tx_table", te.levels * te.table_size, te.features_per_level);
  add_tensor("rx_table", re.levels * re.table_size, re.features_per_level);
  int in = re.output_dim();
  const int na = static_cast<int>(cfg_.attenuation_hidden.size());
  for (int l = 0; l <= na; ++l) {
    const int out = l < na ? cfg_.attenuation_hidden[l] : 1 + cfg_.feature_dim;
    add_tensor("att.W" + std::to_string(l), out, in);
    add_tensor("att.b" + std::to_string(l), out, 1);
    in = out;
  }
  in = cfg_.feature_dim + te.output_dim();
  const int nr = static_cast<int>(cfg_.radiance_hidden.size());
  for (int l = 0; l <= nr; ++l) {
    const int out = l < nr ? cfg_.radiance_hidden[l] : 2;
    add_tensor("rad.W" + std::to_string(l), out, in);
    add_tensor("rad.b" + std::to_string(l), out, 1);
    in = out;
  }
  initialize();
}

void MultipathNet::add_tensor(const std::string& name, int rows, int cols) {
  tensors_.push_back({name, params_.size(), rows, cols});
  params_.resize(params_.size() + static_cast<std::size_t>(rows) * cols, 0.0);
}

const Tensor& MultipathNet::tensor(const std::string& name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return t;
  throw DomainError("no tensor named " + name);
}

void MultipathNet::initialize() {
  Rng rng(cfg_.seed);
  const auto L = detail::layout_of(*this);
  for (const Tensor* t : {L.tx_table, L.rx_table})
    for (std::size_t k = 0; k < t->size(); ++k) params_[t->offset + k] = rng.uniform(-cfg_.init_table_scale, cfg_.init_table_scale);
  const auto init_layers = [&](const std::vector<detail::Layer>& layers, double out_scale) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Tensor& W = *layers[l].W;
      const double bound = std::sqrt(6.0 / W.cols) * (l + 1 == layers.size() ? out_scale : 1.0);
      for (std::size_t k = 0; k < W.size(); ++k) params_[W.offset + k] = rng.uniform(-bound, bound);
    }
  };
  init_layers(L.att, 1.0);
  init_layers(L.rad, 0.1);
  params_[L.att.back().b->offset] = cfg_.init_delta;
  params_[L.rad.back().b->offset] = cfg_.init_amplitude;
  round_to_float();
}

void MultipathNet::zero_output_layers() {
  const auto L = detail::layout_of(*this);
  for (const auto* layer : {&L.att.back(), &L.rad.back()}) {
    std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(layer->W->offset), layer->W->size(), 0.0);
    std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(layer->b->offset), layer->b->size(), 0.0);
  }
}

void MultipathNet::round_to_float() {
  for (auto& v : params_) v = detail::to_float(v);
}

std::vector<double> MultipathNet::encode_tx(const Vec3& p) const {
  const auto& t = *detail::layout_of(*this).tx_table;
  std::vector<double> out(static_cast<std::size_t>(cfg_.tx_encoder.output_dim()));
  encode_position(cfg_.tx_encoder, values(t), p, out);
  return out;
}

std::vector<double> MultipathNet::encode_rx(const Vec3& p) const {
  const auto& t = *detail::layout_of(*this).rx_table;
  std::vector<double> out(static_cast<std::size_t>(cfg_.rx_encoder.output_dim()));
  encode_position(cfg_.rx_encoder, values(t), p, out);
  return out;
}

NetOutput MultipathNet::forward(const Vec3& p_tx, const Vec3& p_rx) const {
  double delta = 0.0;
  std::vector<ComplexSignal> s;
  evaluate(std::span<const Vec3>(&p_tx, 1), p_rx, delta, s);
  NetOutput out;
  out.delta = delta;
  out.signal = s[0];
  out.amplitude = std::abs(s[0]);
  out.phase = out.amplitude > 0.0 ? std::arg(s[0]) : 0.0;
  if (out.phase == -std::numbers::pi) out.phase = std::numbers::pi;
  return out;
}

void MultipathNet::evaluate(std::span<const Vec3> tx_points, const Vec3& rx_point, double& delta,
                            std::vector<ComplexSignal>& signals) const {
  using detail::bias;
  using detail::weights;
  const auto L = detail::layout_of(*this);
  Eigen::VectorXd x(cfg_.rx_encoder.output_dim());
  encode_position(cfg_.rx_encoder, values(*L.rx_table), rx_point, {x.data(), static_cast<std::size_t>(x.size())});
  for (std::size_t l = 0; l < L.att.size(); ++l) {
    Eigen::VectorXd z = weights(params_, *L.att[l].W) * x + bias(params_, *L.att[l].b);
    x = l + 1 < L.att.size() ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
  }
  delta = std::max(x[0], 0.0);
  const int fd = cfg_.feature_dim;
  const Eigen::VectorXd feat = x.segment(1, fd);

  const Tensor& W0 = *L.rad[0].W;
  const auto W0m = weights(params_, W0);
  const Eigen::VectorXd a_part = W0m.leftCols(fd) * feat + bias(params_, *L.rad[0].b);
  Eigen::VectorXd e(cfg_.tx_encoder.output_dim());
  signals.clear();
  for (const auto& t : tx_points) {
    encode_position(cfg_.tx_encoder, values(*L.tx_table), t, {e.data(), static_cast<std::size_t>(e.size())});
    Eigen::VectorXd h = (a_part + W0m.rightCols(e.size()) * e).cwiseMax(0.0);
    for (std::size_t l = 1; l < L.rad.size(); ++l) {
      Eigen::VectorXd z = weights(params_, *L.rad[l].W) * h + bias(params_, *L.rad[l].b);
      h = l + 1 < L.rad.size() ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
    }
    const double a = std::max(h[0], 0.0);
    signals.push_back({a * std::cos(h[1]), a * std::sin(h[1])});
  }
  if (!std::isfinite(delta)) throw NumericFault("multipath net: non-finite attenuation");
  for (const auto& s : signals)
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) throw NumericFault("multipath net: non-finite signal");
}

namespace detail {

Layout layout_of(const MultipathNet& net) {
  const auto& ts = net.tensors();
  Layout L;
  L.tx_table = &ts[0];
  L.rx_table = &ts[1];
  std::size_t k = 2;
  for (int l = 0; l < net.attenuation_layers(); ++l, k += 2) L.att.push_back({&ts[k], &ts[k + 1]});
  for (int l = 0; l < net.radiance_layers(); ++l, k += 2) L.rad.push_back({&ts[k], &ts[k + 1]});
  return L;
}

}  // namespace detail

void save_checkpoint(const MultipathNet& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  const std::string cfg = to_json(net.config()).dump();
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  put_u32(out, static_cast<std::uint32_t>(net.tensors().size()));
  for (const auto& t : net.tensors()) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.rows));
    put_u32(out, static_cast<std::uint32_t>(t.cols));
    std::vector<float> buf(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) buf[k] = static_cast<float>(net.params()[t.offset + k]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw Error("failed writing checkpoint: " + path.string());
}

MultipathNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IncompatibleCheckpoint("cannot open checkpoint: " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));
  char magic[8];
  r.read(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw IncompatibleCheckpoint("not a checkpoint (bad magic)");
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw IncompatibleCheckpoint("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  const auto cfg_len = r.u32("config length");
  NetConfig cfg;
  try {
    cfg = net_config_from_json(json::parse(r.str(cfg_len, "config")));
  } catch (const json::exception& e) {
    throw IncompatibleCheckpoint(std::string("checkpoint config unreadable: ") + e.what());
  } catch (const MalformedInput& e) {
    throw IncompatibleCheckpoint(std::string("checkpoint config unreadable: ") + e.what());
  } catch (const DomainError& e) {
    throw IncompatibleCheckpoint(std::string("checkpoint config invalid: ") + e.what());
  }
  MultipathNet net(cfg);
  const auto count = r.u32("tensor count");
  if (count != net.tensors().size()) throw IncompatibleCheckpoint("checkpoint tensor count does not match its config");
  for (const auto& t : net.tensors()) {
    const auto name = r.str(r.u32("tensor name"), "tensor name");
    const auto rows = r.u32("tensor shape");
    const auto cols = r.u32("tensor shape");
    if (name != t.name || rows != static_cast<std::uint32_t>(t.rows) || cols != static_cast<std::uint32_t>(t.cols)) {
      throw IncompatibleCheckpoint("checkpoint tensor " + name + " does not match expected " + t.name);
    }
    std::vector<float> buf(t.size());
    r.read(buf.data(), buf.size() * sizeof(float), t.name.c_str());
    for (std::size_t k = 0; k < t.size(); ++k) net.params()[t.offset + k] = buf[k];
  }
  if (!r.done()) throw IncompatibleCheckpoint("checkpoint has trailing bytes");
  return net;
}

MultipathNet load_checkpoint(const std::filesystem::path& path, const NetConfig& expected) {
  auto net = load_checkpoint(path);
  const auto& got = net.config();
  require_same_encoder("tx_encoder", got.tx_encoder, expected.tx_encoder);
  require_same_encoder("rx_encoder", got.rx_encoder, expected.rx_encoder);
  require_same("attenuation_hidden", got.attenuation_hidden, expected.attenuation_hidden);
  require_same("feature_dim", got.feature_dim, expected.feature_dim);
  require_same("radiance_hidden", got.radiance_hidden, expected.radiance_hidden);
  return net;
}

}  // namespace radiomap::mpnet
