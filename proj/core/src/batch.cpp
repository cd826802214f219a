#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gbt/embeddings.hpp"

namespace gbt {

TextBatch make_text_batch(const std::vector<int>& word_ids) {
  TextBatch b;
  b.token_ids.reserve(word_ids.size() + 2);
  b.token_ids.push_back(kClsId);
  b.token_ids.insert(b.token_ids.end(), word_ids.begin(), word_ids.end());
  b.token_ids.push_back(kSepId);
  b.positions.resize(b.token_ids.size());
  for (size_t i = 0; i < b.positions.size(); ++i) b.positions[i] = static_cast<int>(i);
  b.segment_ids.assign(b.token_ids.size(), 0);
  return b;
}

void validate_vision(const VisionBatch& b) {
  if (b.features.rows == 0) throw EmptyRegions("vision batch has no regions");
  if (b.boxes.rows != b.features.rows || b.boxes.cols != 4)
    throw ShapeMismatch("boxes " + b.boxes.shape() + " for " + std::to_string(b.features.rows) + " regions");
  if (b.detector_dists.rows != b.features.rows)
    throw ShapeMismatch("detector_dists " + b.detector_dists.shape());
  if (!(b.width > 0.0) || !(b.height > 0.0)) throw InvalidBox("image size must be positive");
  for (int k = 0; k < b.boxes.rows; ++k) {
    double x1 = b.boxes(k, 0), y1 = b.boxes(k, 1), x2 = b.boxes(k, 2), y2 = b.boxes(k, 3);
    if (!(0.0 <= x1 && x1 < x2 && x2 <= b.width) || !(0.0 <= y1 && y1 < y2 && y2 <= b.height))
      throw InvalidBox("region " + std::to_string(k) + " box (" + std::to_string(x1) + "," + std::to_string(y1) +
                       "," + std::to_string(x2) + "," + std::to_string(y2) + ")");
  }
  for (int k = 0; k < b.detector_dists.rows; ++k) {
    double sum = 0.0;
    for (int c = 0; c < b.detector_dists.cols; ++c) {
      double p = b.detector_dists(k, c);
      if (p < 0.0 || !std::isfinite(p)) throw InvalidDistribution("region " + std::to_string(k));
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-6)
      throw InvalidDistribution("region " + std::to_string(k) + " sums to " + std::to_string(sum));
  }
  if (!all_finite(b.features)) throw ShapeMismatch("non-finite region feature");
}

Mat box5(const VisionBatch& b) {
  Mat out(b.boxes.rows, 5);
  for (int k = 0; k < b.boxes.rows; ++k) {
    double x1 = b.boxes(k, 0), y1 = b.boxes(k, 1), x2 = b.boxes(k, 2), y2 = b.boxes(k, 3);
    out(k, 0) = x1 / b.width;
    out(k, 1) = y1 / b.height;
    out(k, 2) = x2 / b.width;
    out(k, 3) = y2 / b.height;
    out(k, 4) = (x2 - x1) * (y2 - y1) / (b.width * b.height);
  }
  return out;
}

std::pair<std::vector<double>, std::array<double, 4>> make_img_token(const VisionBatch& b) {
  if (b.features.rows == 0) throw EmptyRegions("cannot pool zero regions");
  std::vector<double> mean(b.features.cols, 0.0);
  for (int k = 0; k < b.features.rows; ++k)
    for (int j = 0; j < b.features.cols; ++j) mean[j] += b.features(k, j);
  for (auto& m : mean) m /= b.features.rows;
  return {std::move(mean), {0.0, 0.0, b.width, b.height}};
}

VisionBatch with_img_token(const VisionBatch& b) {
  validate_vision(b);
  auto [feat, box] = make_img_token(b);
  VisionBatch out;
  out.width = b.width;
  out.height = b.height;
  out.features = Mat(b.features.rows + 1, b.features.cols);
  out.boxes = Mat(b.boxes.rows + 1, 4);
  out.detector_dists = Mat(b.detector_dists.rows + 1, b.detector_dists.cols);
  for (int j = 0; j < out.features.cols; ++j) out.features(0, j) = feat[j];
  for (int j = 0; j < 4; ++j) out.boxes(0, j) = box[j];
  for (int c = 0; c < out.detector_dists.cols; ++c)
    out.detector_dists(0, c) = 1.0 / out.detector_dists.cols;
  std::copy(b.features.a.begin(), b.features.a.end(), out.features.row(1));
  std::copy(b.boxes.a.begin(), b.boxes.a.end(), out.boxes.row(1));
  std::copy(b.detector_dists.a.begin(), b.detector_dists.a.end(), out.detector_dists.row(1));
  return out;
}

std::vector<double> global_image_feature(const VisionBatch& b) { return make_img_token(b).first; }

Mat embed_text(const TextBatch& b, const ArchSpec& spec, ParamStore& ps, const std::vector<double>& global_img) {
  Graph g(&ps);
  return g.value(g_embed_text(g, spec, b, global_img));
}

Mat embed_vision(const VisionBatch& b, const ArchSpec& spec, ParamStore& ps) {
  Graph g(&ps);
  return g.value(g_embed_vision(g, spec, b));
}

std::vector<int> tokenize(const std::string& caption, int vocab) {
  std::vector<int> ids;
  std::istringstream in(caption);
  std::string tok;
  while (in >> tok) {
    if (tok.size() < 2 || tok[0] != 'w') throw ParseError("malformed word '" + tok + "'");
    int k = -1;
    auto res = std::from_chars(tok.data() + 1, tok.data() + tok.size(), k);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || k < 0)
      throw ParseError("malformed word '" + tok + "'");
    int id = kFirstWordId + k;
    if (id >= vocab) throw IdOutOfRange("word '" + tok + "' exceeds vocab " + std::to_string(vocab));
    ids.push_back(id);
  }
  return ids;
}

std::string word(int id) {
  if (id < kFirstWordId) throw BadArgument("special token has no word form");
  return "w" + std::to_string(id - kFirstWordId);
}

std::vector<Caption> read_captions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Caption> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path + ":" + std::to_string(lineno) + ": missing tab");
    Caption c;
    uint64_t id = 0;
    auto res = std::from_chars(line.data(), line.data() + tab, id);
    if (res.ec != std::errc() || res.ptr != line.data() + tab)
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad image id");
    c.image_id = id;
    c.text = line.substr(tab + 1);
    out.push_back(std::move(c));
  }
  return out;
}

void write_captions(const std::string& path, const std::vector<Caption>& captions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& c : captions) out << c.image_id << '\t' << c.text << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace gbt
