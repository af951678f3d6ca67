#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "v1net/gabor.hpp"
#include "v1net/rng.hpp"
#include "v1net/tensor.hpp"

namespace v1 {

struct ConvBlockSpec {
  int out_channels = 64;
  int stride = 1;
};

// Bottleneck (1x1, v1_channels -> bottleneck_out, with bias) followed by 3x3
// conv blocks, global average pooling, and a linear classifier. ReLU after
// every conv.
struct BackendConfig {
  int v1_channels = 512;
  int bottleneck_out = 64;
  std::vector<ConvBlockSpec> head = {{64, 1}, {128, 2}};
  int num_classes = 10;
};

struct TrainConfig {
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int batch_size = 128;
  int epochs = 60;
  double plateau_threshold = 0.01;  // absolute improvement in val loss
  int plateau_patience = 5;
  double plateau_factor = 10.0;
  std::uint64_t seed = 0;
  bool augment = true;
};

struct ConvLayer {
  int in_c = 0, out_c = 0, k = 1, stride = 1, pad = 0;
  std::vector<float> W;  // [out_c][in_c*k*k]
  std::vector<float> b;  // [out_c]
};

class Backend;

// Per-batch activation cache for backprop. Holds a pointer to the input
// batch, which must outlive the cache between forward and backward.
struct BackendCache {
  const Tensor* input = nullptr;
  std::vector<Tensor> preacts;   // per conv layer, pre-ReLU
  std::vector<Tensor> postacts;  // per conv layer, post-ReLU
  std::vector<float> pooled;     // [B, feat]
  std::vector<float> logits;     // [B, classes]
  int batch = 0;
};

// Gradients and momentum buffers mirror the parameter layout.
struct BackendGrads {
  std::vector<std::vector<float>> slots;
};

class Backend {
 public:
  Backend() = default;
  explicit Backend(const BackendConfig& cfg);

  void init_params(std::uint64_t seed);  // Kaiming fan-in, zero bias

  const BackendConfig& config() const { return cfg_; }
  const std::vector<ConvLayer>& convs() const { return convs_; }
  const std::vector<float>& fc_weight() const { return fcW_; }

  // Bottleneck weight matrix [bottleneck_out x v1_channels], bias excluded.
  Tensor bottleneck_weight() const;

  // x: [B, v1_channels, H, W]
  void forward(const Tensor& x, BackendCache& cache) const;
  // dlogits: [B, classes]; fills grads (accumulating from zero).
  void backward(const BackendCache& cache, const std::vector<float>& dlogits,
                BackendGrads& grads) const;

  BackendGrads make_grads() const;
  std::vector<std::span<float>> param_views();
  std::vector<std::span<const float>> param_views() const;
  std::size_t num_params() const;

  void save(const std::filesystem::path& path,
            const BackendGrads* momentum = nullptr) const;
  static Backend load(const std::filesystem::path& path,
                      BackendGrads* momentum = nullptr);

 private:
  BackendConfig cfg_;
  std::vector<ConvLayer> convs_;  // [0] = bottleneck, then head blocks
  std::vector<float> fcW_;        // [classes][feat]
  std::vector<float> fcB_;        // [classes]
  int feat_ = 0;

  friend struct BackendIO;
};

// Mean cross-entropy with a log-sum-exp stable softmax. dlogits (optional)
// receives d loss / d logits. Throws on out-of-range labels.
double softmax_cross_entropy(const std::vector<float>& logits, int batch,
                             int classes, const std::vector<int>& labels,
                             std::vector<float>* dlogits = nullptr);

// Classic momentum SGD with L2 folded into the gradient:
//   v <- momentum * v + (g + wd * w); w <- w - lr * v
// Throws on non-finite gradients.
void sgd_update(std::span<float> w, std::span<const float> g,
                std::span<float> v, double lr, double momentum, double wd);
void sgd_step(Backend& net, const BackendGrads& grads, BackendGrads& momentum,
              double lr, const TrainConfig& cfg);

// Reduce-on-plateau state. lr only decreases, quantized to lr0 / factor^d.
struct PlateauSchedule {
  double best = 1e300;
  int since_improvement = 0;
  // Returns the (possibly reduced) learning rate after seeing val_loss.
  double step(double val_loss, double lr, const TrainConfig& cfg);
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
};

struct LoadedDataset {
  Tensor images;            // [N,3,H,W], values in [0,1]
  std::vector<int> labels;  // [N]
  int num_classes = 0;
};

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  std::uint64_t bank_checksum_before = 0;
  std::uint64_t bank_checksum_after = 0;
};

// Full loop: augment -> V1 forward -> backend forward -> loss -> backward
// (backend only) -> SGD; per-epoch validation and plateau schedule.
// When cache_frontend is set (only valid with cfg.augment == false) the V1
// activations of the training set are computed once and reused every epoch.
TrainResult train(const FilterBank& bank, Backend& net, const TrainConfig& cfg,
                  const LoadedDataset& train_set, const LoadedDataset& val_set,
                  bool cache_frontend = false, bool verbose = false);

void write_metrics_csv(const std::vector<EpochMetrics>& metrics,
                       const std::filesystem::path& path);

// Validation pass: mean loss and top-1 accuracy on normalized clean images.
std::pair<double, double> evaluate(const FilterBank& bank, const Backend& net,
                                   const LoadedDataset& data, int batch_size = 128);

}  // namespace v1
