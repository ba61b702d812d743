#include "tse/fieldnet.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace tse {

void FieldNet::build_offsets() {
  if (sizes_.size() < 3 || sizes_.front() != 2 || sizes_.back() != 1)
    throw std::invalid_argument(
        "FieldNet: layer sizes must run from 2 to 1 with at least one hidden layer");
  std::size_t n = 0;
  w_off_.clear();
  b_off_.clear();
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l] > kMaxWidth || sizes_[l + 1] < 1 ||
        sizes_[l + 1] > kMaxWidth)
      throw std::invalid_argument("FieldNet: layer width out of range");
    w_off_.push_back(n);
    n += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1];
    b_off_.push_back(n);
    n += sizes_[l + 1];
  }
  params_.assign(n, 0.0);
}

FieldNet FieldNet::make(std::vector<int> layer_sizes, const Domain& dom,
                        double rho_m, std::uint64_t seed) {
  if (!(dom.x_hi > dom.x_lo) || !(dom.t_hi > dom.t_lo))
    throw std::invalid_argument("FieldNet: degenerate domain");
  if (!(rho_m > 0.0)) throw std::invalid_argument("FieldNet: rho_m must be > 0");
  FieldNet net;
  net.sizes_ = std::move(layer_sizes);
  net.dom_ = dom;
  net.rho_m_ = rho_m;
  net.build_offsets();

  // Glorot-uniform weights, zero biases
  Xoshiro256 rng(seed);
  for (int l = 0; l < net.layer_count(); ++l) {
    const int in = net.sizes_[l], out = net.sizes_[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    double* w = net.params_.data() + net.w_off_[l];
    for (int k = 0; k < in * out; ++k) w[k] = rng.uniform(-limit, limit);
  }
  return net;
}

FieldNet FieldNet::make_mlp(int hidden_layers, int hidden_width, const Domain& dom,
                            double rho_m, std::uint64_t seed) {
  if (hidden_layers < 1) throw std::invalid_argument("FieldNet: need hidden layers");
  std::vector<int> sizes;
  sizes.push_back(2);
  for (int i = 0; i < hidden_layers; ++i) sizes.push_back(hidden_width);
  sizes.push_back(1);
  return make(std::move(sizes), dom, rho_m, seed);
}

double FieldNet::forward(double x, double t) const {
  return eval_on<double>(std::span<const double>(params_), x, t);
}

FieldNet::InputGrads FieldNet::input_gradients(double x, double t) const {
  const ad::ProbeD p = probe(x, t);
  return {p.rho_x, p.rho_t};
}

ad::ProbeD FieldNet::probe(double x, double t) const {
  return eval_probe<double>(std::span<const double>(params_), x, t);
}

namespace {
std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

void FieldNet::save_checkpoint(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "# nltse-fieldnet,v1\n";
  os << "# layers," << sizes_.size();
  for (int s : sizes_) os << ',' << s;
  os << '\n';
  os << "# domain," << fmt17(dom_.x_lo) << ',' << fmt17(dom_.x_hi) << ','
     << fmt17(dom_.t_lo) << ',' << fmt17(dom_.t_hi) << '\n';
  os << "# rho_m," << fmt17(rho_m_) << '\n';
  for (std::size_t i = 0; i < params_.size(); ++i)
    os << "p," << i << ',' << fmt17(params_[i]) << '\n';
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

FieldNet FieldNet::load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "# nltse-fieldnet,v1")
    throw std::runtime_error("bad checkpoint header in " + path.string());

  if (!std::getline(is, line))
    throw std::runtime_error("truncated checkpoint " + path.string());
  std::vector<int> sizes;
  {
    std::istringstream ss(line.substr(9));  // after "# layers,"
    int count;
    char comma;
    ss >> count;
    for (int i = 0; i < count; ++i) {
      int s;
      if (!(ss >> comma >> s))
        throw std::runtime_error("bad layer list in " + path.string());
      sizes.push_back(s);
    }
  }

  Domain dom;
  if (!std::getline(is, line) ||
      std::sscanf(line.c_str(), "# domain,%lf,%lf,%lf,%lf", &dom.x_lo, &dom.x_hi,
                  &dom.t_lo, &dom.t_hi) != 4)
    throw std::runtime_error("bad domain line in " + path.string());
  double rho_m;
  if (!std::getline(is, line) ||
      std::sscanf(line.c_str(), "# rho_m,%lf", &rho_m) != 1)
    throw std::runtime_error("bad rho_m line in " + path.string());

  FieldNet net;
  net.sizes_ = std::move(sizes);
  net.dom_ = dom;
  net.rho_m_ = rho_m;
  net.build_offsets();

  std::size_t filled = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t idx;
    char val[64];
    if (std::sscanf(line.c_str(), "p,%zu,%63s", &idx, val) != 2)
      throw std::runtime_error("bad parameter row in " + path.string());
    if (idx >= net.params_.size())
      throw std::runtime_error("parameter index out of range in " + path.string());
    net.params_[idx] = std::strtod(val, nullptr);
    ++filled;
  }
  if (filled != net.params_.size())
    throw std::runtime_error("checkpoint is missing parameters: " + path.string());
  return net;
}

// --- NetWorkspace -------------------------------------------------------

void NetWorkspace::bind(const FieldNet& net) {
  net_ = &net;
  layers_ = net.layer_count();
  width_.clear();
  off_.clear();
  std::size_t total = 0;
  for (int l = 0; l < layers_ - 1; ++l) {  // hidden layers only
    width_.push_back(net.layer_sizes()[l + 1]);
    off_.push_back(total);
    total += width_.back();
  }
  a_.assign(total, 0.0);
  s_.assign(total, 0.0);
  tzx_.assign(total, 0.0);
  tzt_.assign(total, 0.0);
  tax_.assign(total, 0.0);
  tat_.assign(total, 0.0);
}

ad::ProbeD NetWorkspace::forward(double x, double t, bool with_tangents) {
  const FieldNet& net = *net_;
  const Domain& dom = net.domain();
  const double* p = net.params().data();
  tangents_ = with_tangents;
  clamped_ = false;

  in_[0] = (x - dom.x_lo) * (1.0 / (dom.x_hi - dom.x_lo));
  in_[1] = (t - dom.t_lo) * (1.0 / (dom.t_hi - dom.t_lo));
  seed_x_ = 1.0 / (dom.x_hi - dom.x_lo);
  seed_t_ = 1.0 / (dom.t_hi - dom.t_lo);

  const int hidden = layers_ - 1;
  const double* prev_a = in_;
  const double* prev_tx = nullptr;
  const double* prev_tt = nullptr;
  int in_w = 2;

  for (int l = 0; l < hidden; ++l) {
    const int out_w = width_[l];
    const double* W = p + net.weight_offset(l);
    const double* b = p + net.bias_offset(l);
    double* a = a_.data() + off_[l];
    double* s = s_.data() + off_[l];
    double* tzx = tzx_.data() + off_[l];
    double* tzt = tzt_.data() + off_[l];
    double* tax = tax_.data() + off_[l];
    double* tat = tat_.data() + off_[l];

    for (int i = 0; i < out_w; ++i) {
      const double* w = W + static_cast<std::size_t>(i) * in_w;
      double z = b[i];
      for (int j = 0; j < in_w; ++j) z += w[j] * prev_a[j];
      const double th = std::tanh(z);
      a[i] = th;
      s[i] = 1.0 - th * th;
      if (tangents_) {
        double zx, zt;
        if (l == 0) {
          zx = w[0] * seed_x_;
          zt = w[1] * seed_t_;
        } else {
          zx = 0.0;
          zt = 0.0;
          for (int j = 0; j < in_w; ++j) zx += w[j] * prev_tx[j];
          for (int j = 0; j < in_w; ++j) zt += w[j] * prev_tt[j];
        }
        tzx[i] = zx;
        tzt[i] = zt;
        tax[i] = s[i] * zx;
        tat[i] = s[i] * zt;
      }
    }
    prev_a = a;
    prev_tx = tax;
    prev_tt = tat;
    in_w = out_w;
  }

  // output layer (single unit)
  const double* Wo = p + net.weight_offset(hidden);
  double zo = p[net.bias_offset(hidden)];
  for (int j = 0; j < in_w; ++j) zo += Wo[j] * prev_a[j];
  tzox_ = 0.0;
  tzot_ = 0.0;
  if (tangents_) {
    for (int j = 0; j < in_w; ++j) tzox_ += Wo[j] * prev_tx[j];
    for (int j = 0; j < in_w; ++j) tzot_ += Wo[j] * prev_tt[j];
  }
  sig_ = ad::sigmoid(zo);
  double rho = net.rho_m() * sig_;
  if (rho <= 0.0 || rho >= net.rho_m()) {
    clamped_ = true;
    rho = rho <= 0.0 ? net.rho_m() * 1e-300 : std::nextafter(net.rho_m(), 0.0);
    return {rho, 0.0, 0.0};
  }
  // association matches the Dual2 path bit for bit: rho_m * (sigma' * tz)
  const double g = sig_ * (1.0 - sig_);
  return {rho, tangents_ ? net.rho_m() * (g * tzox_) : 0.0,
          tangents_ ? net.rho_m() * (g * tzot_) : 0.0};
}

void NetWorkspace::backward(double w_rho, double w_rho_x, double w_rho_t,
                            std::span<double> grad) {
  if (clamped_) return;
  const FieldNet& net = *net_;
  const double* p = net.params().data();
  const int hidden = layers_ - 1;
  const double rho_m = net.rho_m();

  const double g = sig_ * (1.0 - sig_);
  const double gg = g * (1.0 - 2.0 * sig_);  // d(sigma')/dz

  double adj_zo = w_rho * rho_m * g;
  double adj_tzox = 0.0, adj_tzot = 0.0;
  if (tangents_) {
    adj_zo += rho_m * gg * (w_rho_x * tzox_ + w_rho_t * tzot_);
    adj_tzox = w_rho_x * rho_m * g;
    adj_tzot = w_rho_t * rho_m * g;
  }

  double adj_a[FieldNet::kMaxWidth], adj_tax[FieldNet::kMaxWidth],
      adj_tat[FieldNet::kMaxWidth];
  double adj_z[FieldNet::kMaxWidth], adj_tzx[FieldNet::kMaxWidth],
      adj_tzt[FieldNet::kMaxWidth];

  // output layer
  {
    const int in_w = width_[hidden - 1];
    const double* al = a_.data() + off_[hidden - 1];
    const double* taxl = tax_.data() + off_[hidden - 1];
    const double* tatl = tat_.data() + off_[hidden - 1];
    const double* Wo = p + net.weight_offset(hidden);
    double* gw = grad.data() + net.weight_offset(hidden);
    for (int j = 0; j < in_w; ++j) {
      double acc = adj_zo * al[j];
      if (tangents_) acc += adj_tzox * taxl[j] + adj_tzot * tatl[j];
      gw[j] += acc;
      adj_a[j] = Wo[j] * adj_zo;
      adj_tax[j] = Wo[j] * adj_tzox;
      adj_tat[j] = Wo[j] * adj_tzot;
    }
    grad[net.bias_offset(hidden)] += adj_zo;
  }

  for (int l = hidden - 1; l >= 0; --l) {
    const int out_w = width_[l];
    const double* a = a_.data() + off_[l];
    const double* s = s_.data() + off_[l];
    const double* tzx = tzx_.data() + off_[l];
    const double* tzt = tzt_.data() + off_[l];

    for (int i = 0; i < out_w; ++i) {
      double az = s[i] * adj_a[i];
      if (tangents_) {
        az -= 2.0 * a[i] * s[i] * (adj_tax[i] * tzx[i] + adj_tat[i] * tzt[i]);
        adj_tzx[i] = s[i] * adj_tax[i];
        adj_tzt[i] = s[i] * adj_tat[i];
      }
      adj_z[i] = az;
    }

    const double* W = p + net.weight_offset(l);
    double* gw = grad.data() + net.weight_offset(l);
    double* gb = grad.data() + net.bias_offset(l);

    if (l == 0) {
      for (int i = 0; i < out_w; ++i) {
        const std::size_t r = static_cast<std::size_t>(i) * 2;
        gw[r + 0] += adj_z[i] * in_[0];
        gw[r + 1] += adj_z[i] * in_[1];
        if (tangents_) {
          gw[r + 0] += adj_tzx[i] * seed_x_;
          gw[r + 1] += adj_tzt[i] * seed_t_;
        }
        gb[i] += adj_z[i];
      }
      return;
    }

    const int in_w = width_[l - 1];
    const double* ap = a_.data() + off_[l - 1];
    const double* taxp = tax_.data() + off_[l - 1];
    const double* tatp = tat_.data() + off_[l - 1];

    double nxt_a[FieldNet::kMaxWidth], nxt_tax[FieldNet::kMaxWidth],
        nxt_tat[FieldNet::kMaxWidth];
    for (int j = 0; j < in_w; ++j) {
      nxt_a[j] = 0.0;
      nxt_tax[j] = 0.0;
      nxt_tat[j] = 0.0;
    }

    for (int i = 0; i < out_w; ++i) {
      const double* w = W + static_cast<std::size_t>(i) * in_w;
      double* gwr = gw + static_cast<std::size_t>(i) * in_w;
      const double az = adj_z[i];
      if (tangents_) {
        const double ax = adj_tzx[i], at = adj_tzt[i];
        for (int j = 0; j < in_w; ++j) {
          gwr[j] += az * ap[j] + ax * taxp[j] + at * tatp[j];
          nxt_a[j] += w[j] * az;
          nxt_tax[j] += w[j] * ax;
          nxt_tat[j] += w[j] * at;
        }
      } else {
        for (int j = 0; j < in_w; ++j) {
          gwr[j] += az * ap[j];
          nxt_a[j] += w[j] * az;
        }
      }
      gb[i] += az;
    }

    for (int j = 0; j < in_w; ++j) {
      adj_a[j] = nxt_a[j];
      adj_tax[j] = nxt_tax[j];
      adj_tat[j] = nxt_tat[j];
    }
  }
}

}  // namespace tse
