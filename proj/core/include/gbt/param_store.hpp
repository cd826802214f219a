#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "gbt/mat.hpp"

namespace gbt {

template <class S>
struct BasicTensor {
  std::string name;  // canonical name
  BasicMat<S> value;
  BasicMat<S> grad;  // same shape, zero until a backward pass fills it
};

// Named parameter tensors with alias-based tying. An alias is a second name
// resolving to the same tensor object, so tied weights share storage and
// their gradients accumulate in one place without any extra bookkeeping.
template <class S>
class BasicParamStore {
public:
  BasicTensor<S>& create(const std::string& name, int rows, int cols) {
    if (by_name_.count(name)) throw BadArgument("tensor already exists: " + name);
    auto t = std::make_shared<BasicTensor<S>>();
    t->name = name;
    t->value = BasicMat<S>(rows, cols);
    t->grad = BasicMat<S>(rows, cols);
    by_name_.emplace(name, t);
    order_.push_back(t);
    return *t;
  }

  void alias(const std::string& name, const std::string& target) {
    if (by_name_.count(name)) throw BadArgument("tensor already exists: " + name);
    auto t = resolve(target);
    by_name_.emplace(name, t);
    alias_of_.emplace(name, t->name);
  }

  bool has(const std::string& name) const { return by_name_.count(name) != 0; }
  bool is_alias(const std::string& name) const { return alias_of_.count(name) != 0; }

  BasicTensor<S>& get(const std::string& name) { return *resolve(name); }
  const BasicTensor<S>& get(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw UnknownTensor(name);
    return *it->second;
  }

  // Canonical name behind `name` (identity for non-aliases).
  const std::string& canonical(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw UnknownTensor(name);
    return it->second->name;
  }

  // Canonical tensors in creation order; aliases do not appear.
  const std::vector<std::shared_ptr<BasicTensor<S>>>& tensors() const { return order_; }

  // Alias names in a stable (sorted) order, each with its target.
  std::vector<std::pair<std::string, std::string>> aliases() const {
    std::vector<std::pair<std::string, std::string>> v(alias_of_.begin(), alias_of_.end());
    std::sort(v.begin(), v.end());
    return v;
  }

  size_t n_tensors() const { return order_.size(); }
  size_t n_aliases() const { return alias_of_.size(); }

  size_t n_params() const {
    size_t n = 0;
    for (const auto& t : order_) n += t->value.size();
    return n;
  }

  void zero_grads() {
    for (auto& t : order_)
      for (auto& g : t->grad.a) g = S(0.0);
  }

private:
  std::shared_ptr<BasicTensor<S>> resolve(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw UnknownTensor(name);
    return it->second;
  }

  std::vector<std::shared_ptr<BasicTensor<S>>> order_;
  std::unordered_map<std::string, std::shared_ptr<BasicTensor<S>>> by_name_;
  std::unordered_map<std::string, std::string> alias_of_;
};

using ParamStore = BasicParamStore<double>;

// Exact copy into double-double storage, aliases preserved. Used to evaluate
// the loss in compensated arithmetic during gradient checks.
inline BasicParamStore<dd> widen(const ParamStore& ps) {
  BasicParamStore<dd> out;
  for (const auto& t : ps.tensors()) {
    auto& w = out.create(t->name, t->value.rows, t->value.cols);
    for (size_t i = 0; i < t->value.a.size(); ++i) w.value.a[i] = dd(t->value.a[i]);
  }
  for (const auto& [name, target] : ps.aliases()) out.alias(name, target);
  return out;
}

}  // namespace gbt
