#include "v1net/backend.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "v1net/augment.hpp"
#include "v1net/conv_util.hpp"
#include "v1net/frontend.hpp"

namespace v1 {

namespace {

template <typename T>
void write_pod(std::ostream& os, const T& x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T x{};
  is.read(reinterpret_cast<char*>(&x), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint truncated");
  return x;
}

void write_vec(std::ostream& os, const std::vector<float>& v) {
  write_pod(os, static_cast<std::uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::vector<float> read_vec(std::istream& is) {
  auto n = read_pod<std::uint64_t>(is);
  std::vector<float> v(n);
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!is) throw std::runtime_error("checkpoint truncated");
  return v;
}

}  // namespace

Backend::Backend(const BackendConfig& cfg) : cfg_(cfg) {
  ConvLayer bottleneck;
  bottleneck.in_c = cfg.v1_channels;
  bottleneck.out_c = cfg.bottleneck_out;
  bottleneck.k = 1;
  bottleneck.stride = 1;
  bottleneck.pad = 0;
  convs_.push_back(bottleneck);
  int in_c = cfg.bottleneck_out;
  for (const auto& blk : cfg.head) {
    ConvLayer l;
    l.in_c = in_c;
    l.out_c = blk.out_channels;
    l.k = 3;
    l.stride = blk.stride;
    l.pad = 1;
    convs_.push_back(l);
    in_c = blk.out_channels;
  }
  feat_ = in_c;
  for (auto& l : convs_) {
    l.W.assign(static_cast<std::size_t>(l.out_c) * l.in_c * l.k * l.k, 0.0f);
    l.b.assign(l.out_c, 0.0f);
  }
  fcW_.assign(static_cast<std::size_t>(cfg.num_classes) * feat_, 0.0f);
  fcB_.assign(cfg.num_classes, 0.0f);
}

void Backend::init_params(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& l : convs_) {
    const double std = std::sqrt(2.0 / (static_cast<double>(l.in_c) * l.k * l.k));
    for (auto& w : l.W) w = static_cast<float>(rng.normal() * std);
    std::fill(l.b.begin(), l.b.end(), 0.0f);
  }
  const double std_fc = std::sqrt(1.0 / feat_);
  for (auto& w : fcW_) w = static_cast<float>(rng.normal() * std_fc);
  std::fill(fcB_.begin(), fcB_.end(), 0.0f);
}

Tensor Backend::bottleneck_weight() const {
  const auto& l = convs_.front();
  Tensor w({l.out_c, l.in_c});
  std::copy(l.W.begin(), l.W.end(), w.v.begin());
  return w;
}

void Backend::forward(const Tensor& x, BackendCache& cache) const {
  if (x.shape.size() != 4 || x.dim(1) != cfg_.v1_channels)
    throw std::invalid_argument("backend forward: channel mismatch");
  const int B = x.dim(0);
  cache.batch = B;
  cache.input = &x;
  cache.preacts.assign(convs_.size(), Tensor());
  cache.postacts.assign(convs_.size(), Tensor());

  int H = x.dim(2), W = x.dim(3);
  std::vector<float> col;
  const Tensor* cur = &x;
  for (std::size_t li = 0; li < convs_.size(); ++li) {
    const auto& l = convs_[li];
    const int oh = conv_out_size(H, l.k, l.stride, l.pad);
    const int ow = conv_out_size(W, l.k, l.stride, l.pad);
    const int N = oh * ow;
    const int K = l.in_c * l.k * l.k;
    cache.preacts[li] = Tensor({B, l.out_c, oh, ow});
    col.resize(static_cast<std::size_t>(K) * N);
    for (int b = 0; b < B; ++b) {
      const float* xin = cur->data() + static_cast<std::size_t>(b) * l.in_c * H * W;
      im2col(xin, l.in_c, H, W, l.k, l.stride, l.pad, col.data());
      float* pre = cache.preacts[li].data() +
                   static_cast<std::size_t>(b) * l.out_c * N;
      cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, l.out_c, N, K, 1.0f,
                  l.W.data(), K, col.data(), N, 0.0f, pre, N);
      for (int oc = 0; oc < l.out_c; ++oc)
        for (int i = 0; i < N; ++i) pre[oc * N + i] += l.b[oc];
    }
    cache.postacts[li] = cache.preacts[li];
    for (float& v : cache.postacts[li].v) v = v > 0.0f ? v : 0.0f;
    cur = &cache.postacts[li];
    H = oh;
    W = ow;
  }

  // Global average pool then linear classifier.
  const Tensor& last = cache.postacts.back();
  const int N = last.dim(2) * last.dim(3);
  cache.pooled.assign(static_cast<std::size_t>(B) * feat_, 0.0f);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < feat_; ++c) {
      const float* p = last.data() + (static_cast<std::size_t>(b) * feat_ + c) * N;
      double s = 0.0;
      for (int i = 0; i < N; ++i) s += p[i];
      cache.pooled[static_cast<std::size_t>(b) * feat_ + c] =
          static_cast<float>(s / N);
    }
  cache.logits.assign(static_cast<std::size_t>(B) * cfg_.num_classes, 0.0f);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < cfg_.num_classes; ++c) {
      double s = fcB_[c];
      const float* wr = fcW_.data() + static_cast<std::size_t>(c) * feat_;
      const float* pf = cache.pooled.data() + static_cast<std::size_t>(b) * feat_;
      for (int f = 0; f < feat_; ++f) s += static_cast<double>(wr[f]) * pf[f];
      cache.logits[static_cast<std::size_t>(b) * cfg_.num_classes + c] =
          static_cast<float>(s);
    }
}

BackendGrads Backend::make_grads() const {
  BackendGrads g;
  for (const auto& l : convs_) {
    g.slots.emplace_back(l.W.size(), 0.0f);
    g.slots.emplace_back(l.b.size(), 0.0f);
  }
  g.slots.emplace_back(fcW_.size(), 0.0f);
  g.slots.emplace_back(fcB_.size(), 0.0f);
  return g;
}

std::vector<std::span<float>> Backend::param_views() {
  std::vector<std::span<float>> v;
  for (auto& l : convs_) {
    v.emplace_back(l.W);
    v.emplace_back(l.b);
  }
  v.emplace_back(fcW_);
  v.emplace_back(fcB_);
  return v;
}

std::vector<std::span<const float>> Backend::param_views() const {
  std::vector<std::span<const float>> v;
  for (const auto& l : convs_) {
    v.emplace_back(l.W);
    v.emplace_back(l.b);
  }
  v.emplace_back(fcW_);
  v.emplace_back(fcB_);
  return v;
}

std::size_t Backend::num_params() const {
  std::size_t n = 0;
  for (const auto& s : const_cast<Backend*>(this)->param_views()) n += s.size();
  return n;
}

void Backend::backward(const BackendCache& cache,
                       const std::vector<float>& dlogits,
                       BackendGrads& grads) const {
  const int B = cache.batch;
  const int C = cfg_.num_classes;
  if (dlogits.size() != static_cast<std::size_t>(B) * C)
    throw std::invalid_argument("backward: dlogits shape mismatch");
  for (auto& s : grads.slots) std::fill(s.begin(), s.end(), 0.0f);

  auto& dfcW = grads.slots[2 * convs_.size()];
  auto& dfcB = grads.slots[2 * convs_.size() + 1];
  std::vector<float> dpooled(static_cast<std::size_t>(B) * feat_, 0.0f);
  for (int b = 0; b < B; ++b) {
    const float* dl = dlogits.data() + static_cast<std::size_t>(b) * C;
    const float* pf = cache.pooled.data() + static_cast<std::size_t>(b) * feat_;
    float* dp = dpooled.data() + static_cast<std::size_t>(b) * feat_;
    for (int c = 0; c < C; ++c) {
      dfcB[c] += dl[c];
      const float* wr = fcW_.data() + static_cast<std::size_t>(c) * feat_;
      float* dwr = dfcW.data() + static_cast<std::size_t>(c) * feat_;
      for (int f = 0; f < feat_; ++f) {
        dwr[f] += dl[c] * pf[f];
        dp[f] += dl[c] * wr[f];
      }
    }
  }

  // GAP backward into the last conv's post-activation gradient.
  const Tensor& last = cache.postacts.back();
  const int lastN = last.dim(2) * last.dim(3);
  Tensor dpost({B, feat_, last.dim(2), last.dim(3)});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < feat_; ++c) {
      const float g = dpooled[static_cast<std::size_t>(b) * feat_ + c] / lastN;
      float* dst = dpost.data() + (static_cast<std::size_t>(b) * feat_ + c) * lastN;
      for (int i = 0; i < lastN; ++i) dst[i] = g;
    }

  std::vector<float> col, dcol;
  for (int li = static_cast<int>(convs_.size()) - 1; li >= 0; --li) {
    const auto& l = convs_[li];
    const Tensor& pre = cache.preacts[li];
    const int oh = pre.dim(2), ow = pre.dim(3), N = oh * ow;
    const int K = l.in_c * l.k * l.k;
    const Tensor& input = (li == 0) ? *cache.input : cache.postacts[li - 1];
    const int H = input.dim(2), W = input.dim(3);

    // ReLU backward in place on dpost.
    for (std::size_t i = 0; i < dpost.size(); ++i)
      if (pre.v[i] <= 0.0f) dpost.v[i] = 0.0f;

    auto& dW = grads.slots[2 * li];
    auto& db = grads.slots[2 * li + 1];
    col.resize(static_cast<std::size_t>(K) * N);
    Tensor dinput;
    if (li > 0) {
      dinput = Tensor({B, l.in_c, H, W});
      dcol.resize(static_cast<std::size_t>(K) * N);
    }
    for (int b = 0; b < B; ++b) {
      const float* xin = input.data() + static_cast<std::size_t>(b) * l.in_c * H * W;
      im2col(xin, l.in_c, H, W, l.k, l.stride, l.pad, col.data());
      const float* dpre = dpost.data() + static_cast<std::size_t>(b) * l.out_c * N;
      // dW += dpre * col^T
      cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, l.out_c, K, N, 1.0f,
                  dpre, N, col.data(), N, 1.0f, dW.data(), K);
      for (int oc = 0; oc < l.out_c; ++oc) {
        double s = 0.0;
        for (int i = 0; i < N; ++i) s += dpre[oc * N + i];
        db[oc] += static_cast<float>(s);
      }
      if (li > 0) {
        // dcol = W^T * dpre, scatter back to dinput
        cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, K, N, l.out_c, 1.0f,
                    l.W.data(), K, dpre, N, 0.0f, dcol.data(), N);
        col2im_add(dcol.data(), l.in_c, H, W, l.k, l.stride, l.pad,
                   dinput.data() + static_cast<std::size_t>(b) * l.in_c * H * W);
      }
    }
    if (li > 0) dpost = std::move(dinput);
  }
}

double softmax_cross_entropy(const std::vector<float>& logits, int batch,
                             int classes, const std::vector<int>& labels,
                             std::vector<float>* dlogits) {
  if (logits.size() != static_cast<std::size_t>(batch) * classes)
    throw std::invalid_argument("cross entropy: logits shape mismatch");
  if (labels.size() != static_cast<std::size_t>(batch))
    throw std::invalid_argument("cross entropy: label count mismatch");
  if (dlogits) dlogits->assign(logits.size(), 0.0f);
  double total = 0.0;
  for (int b = 0; b < batch; ++b) {
    const int y = labels[b];
    if (y < 0 || y >= classes)
      throw std::out_of_range("cross entropy: label out of range");
    const float* lr = logits.data() + static_cast<std::size_t>(b) * classes;
    double mx = lr[0];
    for (int c = 1; c < classes; ++c) mx = std::max(mx, static_cast<double>(lr[c]));
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) sum += std::exp(lr[c] - mx);
    const double lse = mx + std::log(sum);
    total += lse - lr[y];
    if (dlogits) {
      float* dl = dlogits->data() + static_cast<std::size_t>(b) * classes;
      for (int c = 0; c < classes; ++c)
        dl[c] = static_cast<float>(std::exp(lr[c] - lse) / batch);
      dl[y] -= 1.0f / batch;
    }
  }
  return total / batch;
}

void sgd_update(std::span<float> w, std::span<const float> g,
                std::span<float> v, double lr, double momentum, double wd) {
  if (w.size() != g.size() || w.size() != v.size())
    throw std::invalid_argument("sgd_update: size mismatch");
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!std::isfinite(g[i]))
      throw std::runtime_error("sgd_update: non-finite gradient encountered");
    const double vi = momentum * v[i] + (static_cast<double>(g[i]) + wd * w[i]);
    v[i] = static_cast<float>(vi);
    w[i] = static_cast<float>(w[i] - lr * vi);
  }
}

void sgd_step(Backend& net, const BackendGrads& grads, BackendGrads& momentum,
              double lr, const TrainConfig& cfg) {
  auto params = net.param_views();
  if (grads.slots.size() != params.size() ||
      momentum.slots.size() != params.size())
    throw std::invalid_argument("sgd_step: slot count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    sgd_update(params[i], grads.slots[i], momentum.slots[i], lr, cfg.momentum,
               cfg.weight_decay);
}

double PlateauSchedule::step(double val_loss, double lr, const TrainConfig& cfg) {
  if (val_loss < best - cfg.plateau_threshold) {
    best = val_loss;
    since_improvement = 0;
  } else {
    ++since_improvement;
    if (since_improvement >= cfg.plateau_patience) {
      lr /= cfg.plateau_factor;
      since_improvement = 0;
    }
  }
  return lr;
}

std::pair<double, double> evaluate(const FilterBank& bank, const Backend& net,
                                   const LoadedDataset& data, int batch_size) {
  const int N = data.images.dim(0);
  const int H = data.images.dim(2), W = data.images.dim(3);
  const std::size_t img_sz = 3 * static_cast<std::size_t>(H) * W;
  double loss_sum = 0.0;
  int correct = 0;
  BackendCache cache;
  for (int start = 0; start < N; start += batch_size) {
    const int B = std::min(batch_size, N - start);
    Tensor batch({B, 3, H, W});
    std::copy(data.images.data() + start * img_sz,
              data.images.data() + (start + B) * img_sz, batch.data());
    normalize_batch(batch);
    Tensor acts = vone_forward(bank, batch);
    net.forward(acts, cache);
    std::vector<int> labels(data.labels.begin() + start,
                            data.labels.begin() + start + B);
    loss_sum += softmax_cross_entropy(cache.logits, B, net.config().num_classes,
                                      labels) * B;
    for (int b = 0; b < B; ++b) {
      const float* lr = cache.logits.data() +
                        static_cast<std::size_t>(b) * net.config().num_classes;
      int arg = 0;
      for (int c = 1; c < net.config().num_classes; ++c)
        if (lr[c] > lr[arg]) arg = c;
      if (arg == labels[b]) ++correct;
    }
  }
  return {loss_sum / N, static_cast<double>(correct) / N};
}

TrainResult train(const FilterBank& bank, Backend& net, const TrainConfig& cfg,
                  const LoadedDataset& train_set, const LoadedDataset& val_set,
                  bool cache_frontend, bool verbose) {
  if (train_set.images.shape.empty() || train_set.labels.empty())
    throw std::invalid_argument("train: empty dataset");
  if (cache_frontend && cfg.augment)
    throw std::invalid_argument("train: cache_frontend requires augment=false");

  TrainResult result;
  result.bank_checksum_before = bank.checksum();

  const int N = train_set.images.dim(0);
  const int H = train_set.images.dim(2), W = train_set.images.dim(3);
  const std::size_t img_sz = 3 * static_cast<std::size_t>(H) * W;

  // Optional fixed-activation path for non-augmented runs.
  Tensor cached_acts;
  if (cache_frontend) {
    Tensor all({N, 3, H, W});
    std::copy(train_set.images.v.begin(), train_set.images.v.end(), all.data());
    normalize_batch(all);
    cached_acts = vone_forward(bank, all);
  }

  BackendGrads grads = net.make_grads();
  BackendGrads momentum = net.make_grads();
  PlateauSchedule sched;
  double lr = cfg.lr0;
  BackendCache cache;
  std::vector<float> dlogits;
  std::vector<int> order(N);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, 0, epoch));
    for (int i = 0; i < N; ++i) order[i] = i;
    for (int i = N - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
    Rng aug_rng(derive_seed(cfg.seed, 1, epoch));

    double loss_sum = 0.0;
    int seen = 0;
    for (int start = 0; start < N; start += cfg.batch_size) {
      const int B = std::min(cfg.batch_size, N - start);
      std::vector<int> labels(B);
      Tensor acts;
      if (cache_frontend) {
        const std::size_t asz = cached_acts.size() / N;
        acts = Tensor({B, cached_acts.dim(1), cached_acts.dim(2),
                       cached_acts.dim(3)});
        for (int b = 0; b < B; ++b) {
          const int idx = order[start + b];
          labels[b] = train_set.labels[idx];
          std::copy(cached_acts.data() + idx * asz,
                    cached_acts.data() + (idx + 1) * asz,
                    acts.data() + static_cast<std::size_t>(b) * asz);
        }
      } else {
        Tensor batch({B, 3, H, W});
        for (int b = 0; b < B; ++b) {
          const int idx = order[start + b];
          labels[b] = train_set.labels[idx];
          const float* src = train_set.images.data() + idx * img_sz;
          float* dst = batch.data() + static_cast<std::size_t>(b) * img_sz;
          if (cfg.augment) {
            augment(src, dst, H, W, aug_rng);
          } else {
            std::copy(src, src + img_sz, dst);
            for (std::size_t i = 0; i < img_sz; ++i)
              dst[i] = (dst[i] - 0.5f) / 0.5f;
          }
        }
        acts = vone_forward(bank, batch);
      }
      net.forward(acts, cache);
      const double loss = softmax_cross_entropy(
          cache.logits, B, net.config().num_classes, labels, &dlogits);
      net.backward(cache, dlogits, grads);
      sgd_step(net, grads, momentum, lr, cfg);
      loss_sum += loss * B;
      seen += B;
    }

    const auto [val_loss, val_acc] = evaluate(bank, net, val_set, cfg.batch_size);
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / seen;
    m.val_loss = val_loss;
    m.val_acc = val_acc;
    m.lr = lr;
    result.metrics.push_back(m);
    if (verbose)
      std::fprintf(stderr,
                   "epoch %d train_loss %.4f val_loss %.4f val_acc %.3f lr %g\n",
                   epoch, m.train_loss, val_loss, val_acc, lr);
    lr = sched.step(val_loss, lr, cfg);
  }

  result.bank_checksum_after = bank.checksum();
  return result;
}

void write_metrics_csv(const std::vector<EpochMetrics>& metrics,
                       const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os << "epoch,train_loss,val_loss,val_acc,lr\n";
  for (const auto& m : metrics)
    os << m.epoch << "," << m.train_loss << "," << m.val_loss << ","
       << m.val_acc << "," << m.lr << "\n";
}

void Backend::save(const std::filesystem::path& path,
                   const BackendGrads* momentum) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os.write("V1CK", 4);
  write_pod(os, static_cast<std::uint32_t>(1));
  write_pod(os, static_cast<std::uint32_t>(cfg_.v1_channels));
  write_pod(os, static_cast<std::uint32_t>(cfg_.bottleneck_out));
  write_pod(os, static_cast<std::uint32_t>(cfg_.head.size()));
  for (const auto& h : cfg_.head) {
    write_pod(os, static_cast<std::uint32_t>(h.out_channels));
    write_pod(os, static_cast<std::uint32_t>(h.stride));
  }
  write_pod(os, static_cast<std::uint32_t>(cfg_.num_classes));
  for (const auto& l : convs_) {
    write_vec(os, l.W);
    write_vec(os, l.b);
  }
  write_vec(os, fcW_);
  write_vec(os, fcB_);
  const std::uint8_t has_mom = momentum ? 1 : 0;
  write_pod(os, has_mom);
  if (momentum)
    for (const auto& s : momentum->slots) write_vec(os, s);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Backend Backend::load(const std::filesystem::path& path, BackendGrads* momentum) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "V1CK", 4) != 0)
    throw std::runtime_error("not a checkpoint: " + path.string());
  if (read_pod<std::uint32_t>(is) != 1)
    throw std::runtime_error("unsupported checkpoint version");
  BackendConfig cfg;
  cfg.v1_channels = static_cast<int>(read_pod<std::uint32_t>(is));
  cfg.bottleneck_out = static_cast<int>(read_pod<std::uint32_t>(is));
  const auto nhead = read_pod<std::uint32_t>(is);
  cfg.head.clear();
  for (std::uint32_t i = 0; i < nhead; ++i) {
    ConvBlockSpec s;
    s.out_channels = static_cast<int>(read_pod<std::uint32_t>(is));
    s.stride = static_cast<int>(read_pod<std::uint32_t>(is));
    cfg.head.push_back(s);
  }
  cfg.num_classes = static_cast<int>(read_pod<std::uint32_t>(is));
  Backend net(cfg);
  for (auto& l : net.convs_) {
    l.W = read_vec(is);
    l.b = read_vec(is);
  }
  net.fcW_ = read_vec(is);
  net.fcB_ = read_vec(is);
  const auto has_mom = read_pod<std::uint8_t>(is);
  if (momentum) {
    *momentum = net.make_grads();
    if (has_mom)
      for (auto& s : momentum->slots) s = read_vec(is);
  }
  return net;
}

}  // namespace v1
