#include "gbt/attention.hpp"

namespace gbt {

Mat mha(const Mat& X, const Mat& Y, ParamStore& ps, const std::string& prefix, int H) {
  Graph g(&ps);
  return g.value(g_mha(g, g.input(X), g.input(Y), load_att_vars(g, prefix), H));
}

Mat mab(const Mat& X, const Mat& Y, ParamStore& ps, const std::string& prefix, int H, double eps) {
  Graph g(&ps);
  return g.value(g_mab(g, g.input(X), g.input(Y), load_att_vars(g, prefix), H, eps));
}

Mat ffb(const Mat& M, ParamStore& ps, const std::string& prefix, const std::string& activation, double eps) {
  Graph g(&ps);
  return g.value(g_ffb(g, g.input(M), load_ffb_vars(g, prefix), activation, eps));
}

Mat encode_stack(const Mat& X, ParamStore& ps, const ArchSpec& spec) {
  Graph g(&ps);
  return g.value(g_encode_stack(g, g.input(X), spec));
}

}  // namespace gbt
