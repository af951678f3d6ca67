#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "v1net/backend.hpp"
#include "v1net/tensor.hpp"

namespace v1 {

// Directory-tree dataset in the root/split/class_name/*.png|jpg layout.
struct DatasetIndex {
  std::vector<std::string> class_names;
  std::vector<std::pair<std::filesystem::path, int>> items;  // (path, label)
  int image_size = 64;
  int skipped = 0;  // unreadable files
  std::uint64_t checksum = 0;
};

DatasetIndex load_directory_dataset(const std::filesystem::path& root,
                                    const std::string& split);

// Decode to [3, size, size] floats in [0,1]; grayscale replicated to 3
// channels, larger images resized.
Tensor load_image(const std::filesystem::path& path, int size = 64);

LoadedDataset load_images(const DatasetIndex& index, int limit = -1);

// Oriented grating/texture composites with class-specific orientation and
// spatial frequency plus nuisance jitter; writes the directory layout above
// (train and val splits) as PNGs.
void make_synthetic_dataset(const std::filesystem::path& root, int n_classes,
                            int n_train_per_class, int n_val_per_class,
                            std::uint64_t seed, int size = 64);

// Deterministic epoch batching: full cover, last partial batch emitted.
class BatchIterator {
 public:
  BatchIterator(int n, int batch_size, std::uint64_t shuffle_seed, int epoch);
  // Returns indices of the next batch; empty when the epoch is exhausted.
  std::vector<int> next();
  void reset(int epoch);

 private:
  int n_, batch_size_;
  std::uint64_t seed_;
  int pos_ = 0;
  std::vector<int> order_;
};

}  // namespace v1
