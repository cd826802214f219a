#include "gbt/bimodal.hpp"

namespace gbt {

std::pair<Mat, Mat> encode_bimodal(const Mat& X_L, const Mat& X_V, ParamStore& ps, const ArchSpec& spec,
                                   MaskPath path) {
  Graph g(&ps);
  StreamPair out = encode_bimodal_g(g, g.input(X_L), g.input(X_V), spec, path);
  return {g.value(out.l), g.value(out.v)};
}

}  // namespace gbt
