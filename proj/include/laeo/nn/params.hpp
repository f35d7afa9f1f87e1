#pragma once

#include <map>
#include <string>
#include <vector>

#include "laeo/nn/tensor.hpp"

namespace laeo::nn {

// Ordered, named weight tensors with matching gradient buffers.
template <class T>
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
  };

  Tensor<T>& add(const std::string& name, Tensor<T> value) {
    require(!index_.count(name), "duplicate parameter '" + name + "'");
    index_[name] = entries_.size();
    Tensor<T> g(value.shape());
    entries_.push_back({name, std::move(value), std::move(g)});
    return entries_.back().value;
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  Entry& entry(const std::string& name) { return entries_[find(name)]; }
  const Entry& entry(const std::string& name) const { return entries_[find(name)]; }
  Tensor<T>& value(const std::string& name) { return entry(name).value; }
  const Tensor<T>& value(const std::string& name) const { return entry(name).value; }
  Tensor<T>& grad(const std::string& name) { return entry(name).grad; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.grad.fill(T(0));
  }

  template <class U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
    return out;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i)
      if (a.entries_[i].name != b.entries_[i].name || a.entries_[i].value != b.entries_[i].value)
        return false;
    return true;
  }

 private:
  std::size_t find(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter '" + name + "'");
    return it->second;
  }

  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace laeo::nn
