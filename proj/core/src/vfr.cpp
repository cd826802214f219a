#include <cstring>
#include <fstream>

#include "gbt/embeddings.hpp"

namespace gbt {

namespace {

constexpr char kMagic[4] = {'V', 'F', 'R', '1'};

template <class T>
void put(std::ostream& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <class T>
T take(std::istream& in, const std::string& path) {
  char buf[sizeof(T)];
  in.read(buf, sizeof(T));
  if (!in) throw ParseError(path + ": truncated record");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void write_vfr(const std::string& path, const std::vector<ImageRecord>& images) {
  if (images.empty()) throw EmptyRegions("refusing to write an empty record file");
  const int K = images.front().batch.regions();
  const int d_feat = images.front().batch.features.cols;
  const int C = images.front().batch.detector_dists.cols;
  for (const auto& img : images) {
    validate_vision(img.batch);
    if (img.batch.regions() != K || img.batch.features.cols != d_feat || img.batch.detector_dists.cols != C)
      throw ShapeMismatch("image " + std::to_string(img.id) + " breaks the uniform record layout");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic, 4);
  put<uint32_t>(out, static_cast<uint32_t>(images.size()));
  put<uint32_t>(out, static_cast<uint32_t>(K));
  put<uint32_t>(out, static_cast<uint32_t>(d_feat));
  put<uint32_t>(out, static_cast<uint32_t>(C));
  for (const auto& img : images) {
    put<uint64_t>(out, img.id);
    const auto& b = img.batch;
    for (int k = 0; k < K; ++k) {
      for (int j = 0; j < d_feat; ++j) put<float>(out, static_cast<float>(b.features(k, j)));
      for (int j = 0; j < 4; ++j) put<float>(out, static_cast<float>(b.boxes(k, j)));
      put<float>(out, static_cast<float>(b.width));
      put<float>(out, static_cast<float>(b.height));
      for (int c = 0; c < C; ++c) put<float>(out, static_cast<float>(b.detector_dists(k, c)));
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<ImageRecord> read_vfr(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw ParseError(path + ": bad magic");
  const auto n = take<uint32_t>(in, path);
  const auto K = take<uint32_t>(in, path);
  const auto d_feat = take<uint32_t>(in, path);
  const auto C = take<uint32_t>(in, path);
  if (n == 0 || K == 0 || d_feat == 0 || C == 0) throw ParseError(path + ": zero-sized header field");
  std::vector<ImageRecord> out;
  out.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    ImageRecord img;
    img.id = take<uint64_t>(in, path);
    auto& b = img.batch;
    b.features = Mat(static_cast<int>(K), static_cast<int>(d_feat));
    b.boxes = Mat(static_cast<int>(K), 4);
    b.detector_dists = Mat(static_cast<int>(K), static_cast<int>(C));
    for (uint32_t k = 0; k < K; ++k) {
      for (uint32_t j = 0; j < d_feat; ++j) b.features(k, j) = take<float>(in, path);
      for (int j = 0; j < 4; ++j) b.boxes(k, j) = take<float>(in, path);
      b.width = take<float>(in, path);
      b.height = take<float>(in, path);
      for (uint32_t c = 0; c < C; ++c) b.detector_dists(k, c) = take<float>(in, path);
    }
    validate_vision(b);
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace gbt
