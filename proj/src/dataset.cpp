#include "v1net/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "v1net/rng.hpp"

namespace v1 {

namespace {

bool is_image_file(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" ||
         ext == ".ppm" || ext == ".pgm";
}

}  // namespace

DatasetIndex load_directory_dataset(const std::filesystem::path& root,
                                    const std::string& split) {
  const auto base = root / split;
  if (!std::filesystem::is_directory(base))
    throw std::runtime_error("dataset split not found: " + base.string());
  DatasetIndex idx;
  for (const auto& e : std::filesystem::directory_iterator(base))
    if (e.is_directory()) idx.class_names.push_back(e.path().filename().string());
  std::sort(idx.class_names.begin(), idx.class_names.end());
  if (idx.class_names.empty())
    throw std::runtime_error("no class directories under " + base.string());

  for (std::size_t label = 0; label < idx.class_names.size(); ++label) {
    std::vector<std::filesystem::path> files;
    for (const auto& e :
         std::filesystem::directory_iterator(base / idx.class_names[label]))
      if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw std::runtime_error("empty class directory: " +
                               (base / idx.class_names[label]).string());
    for (auto& f : files) idx.items.emplace_back(f, static_cast<int>(label));
  }

  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [p, label] : idx.items) {
    const auto s = p.filename().string();
    h = fnv1a(s.data(), s.size(), h);
    h = fnv1a(&label, sizeof(label), h);
  }
  idx.checksum = h;
  return idx;
}

Tensor load_image(const std::filesystem::path& path, int size) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) throw std::runtime_error("unreadable image: " + path.string());
  if (img.channels() == 1) {
    cv::cvtColor(img, img, cv::COLOR_GRAY2BGR);
  } else if (img.channels() == 4) {
    cv::cvtColor(img, img, cv::COLOR_BGRA2BGR);
  }
  if (img.rows != size || img.cols != size)
    cv::resize(img, img, cv::Size(size, size), 0, 0, cv::INTER_AREA);
  img.convertTo(img, CV_32FC3, 1.0 / 255.0);
  Tensor t({3, size, size});
  const std::size_t plane = static_cast<std::size_t>(size) * size;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const auto& px = img.at<cv::Vec3f>(y, x);  // BGR
      t.v[0 * plane + y * size + x] = px[2];
      t.v[1 * plane + y * size + x] = px[1];
      t.v[2 * plane + y * size + x] = px[0];
    }
  return t;
}

LoadedDataset load_images(const DatasetIndex& index, int limit) {
  int n = static_cast<int>(index.items.size());
  if (limit >= 0 && limit < n) n = limit;
  LoadedDataset ds;
  ds.images = Tensor({n, 3, index.image_size, index.image_size});
  ds.labels.resize(n);
  ds.num_classes = static_cast<int>(index.class_names.size());
  const std::size_t img_sz =
      3 * static_cast<std::size_t>(index.image_size) * index.image_size;
  int out = 0;
  for (int i = 0; i < n; ++i) {
    try {
      Tensor img = load_image(index.items[i].first, index.image_size);
      std::copy(img.v.begin(), img.v.end(),
                ds.images.v.begin() + static_cast<std::size_t>(out) * img_sz);
      ds.labels[out] = index.items[i].second;
      ++out;
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << index.items[i].first << ": "
                << e.what() << "\n";
    }
  }
  if (out < n) {
    ds.images.shape[0] = out;
    ds.images.v.resize(static_cast<std::size_t>(out) * img_sz);
    ds.labels.resize(out);
  }
  return ds;
}

void make_synthetic_dataset(const std::filesystem::path& root, int n_classes,
                            int n_train_per_class, int n_val_per_class,
                            std::uint64_t seed, int size) {
  const std::size_t plane = static_cast<std::size_t>(size) * size;
  auto make_split = [&](const std::string& split, int per_class,
                        std::uint64_t split_tag) {
    for (int c = 0; c < n_classes; ++c) {
      char cname[32];
      std::snprintf(cname, sizeof(cname), "class_%02d", c);
      const auto dir = root / split / cname;
      std::filesystem::create_directories(dir);
      for (int i = 0; i < per_class; ++i) {
        Rng rng(derive_seed(seed, split_tag * 100000 + c, i));
        // Class identity: dominant orientation (and a coarse SF family).
        const double theta =
            (180.0 * c) / n_classes + rng.uniform(-4.0, 4.0);
        const double sf_cpd = ((c % 2 == 0) ? 3.0 : 6.0) * rng.uniform(0.9, 1.1);
        const double ppd = size / 2.0;  // 2 deg field of view
        const double freq = 2.0 * M_PI * sf_cpd / ppd;  // radians per pixel
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double cx = size / 2.0 + rng.uniform(-8.0, 8.0);
        const double cy = size / 2.0 + rng.uniform(-8.0, 8.0);
        const double sigma = size * rng.uniform(0.25, 0.35);
        const double amp = rng.uniform(0.5, 0.7);
        const double th = theta * M_PI / 180.0;
        const double kx = std::cos(th) * freq, ky = std::sin(th) * freq;
        double bg[3];
        for (auto& b : bg) b = rng.uniform(0.35, 0.65);

        cv::Mat img(size, size, CV_8UC3);
        for (int y = 0; y < size; ++y)
          for (int x = 0; x < size; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double env = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            const double g = amp * env * std::cos(kx * x + ky * y + phase);
            auto& px = img.at<cv::Vec3b>(y, x);
            for (int ch = 0; ch < 3; ++ch) {
              double v = bg[ch] + g + 0.01 * rng.normal();
              v = std::clamp(v, 0.0, 1.0);
              px[2 - ch] = static_cast<unsigned char>(std::lround(v * 255.0));
            }
          }
        char fname[32];
        std::snprintf(fname, sizeof(fname), "img_%05d.png", i);
        if (!cv::imwrite((dir / fname).string(), img))
          throw std::runtime_error("failed to write " + (dir / fname).string());
      }
    }
  };
  make_split("train", n_train_per_class, 1);
  make_split("val", n_val_per_class, 2);
  (void)plane;
}

BatchIterator::BatchIterator(int n, int batch_size, std::uint64_t shuffle_seed,
                             int epoch)
    : n_(n), batch_size_(batch_size), seed_(shuffle_seed) {
  reset(epoch);
}

void BatchIterator::reset(int epoch) {
  order_.resize(n_);
  for (int i = 0; i < n_; ++i) order_[i] = i;
  Rng rng(derive_seed(seed_, 0x9e3779b9, epoch));
  for (int i = n_ - 1; i > 0; --i)
    std::swap(order_[i], order_[rng.uniform_int(i + 1)]);
  pos_ = 0;
}

std::vector<int> BatchIterator::next() {
  if (pos_ >= n_) return {};
  const int end = std::min(pos_ + batch_size_, n_);
  std::vector<int> batch(order_.begin() + pos_, order_.begin() + end);
  pos_ = end;
  return batch;
}

}  // namespace v1
