#include "convcl/param_store.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "convcl/errors.hpp"

namespace convcl {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

ParamId ParamStore::add(std::string name, Shape shape) {
  if (find(name).index != infos_.size()) {
    throw ConfigError("duplicate parameter name '" + name + "'");
  }
  ParamInfo info{std::move(name), std::move(shape), values_.size(), 0};
  info.size = shape_size(info.shape);
  values_.resize(values_.size() + info.size, 0.0);
  grads_.resize(values_.size(), 0.0);
  infos_.push_back(std::move(info));
  return ParamId{static_cast<std::uint32_t>(infos_.size() - 1)};
}

const ParamInfo& ParamStore::info(ParamId id) const {
  if (id.index >= infos_.size()) throw IndexError("parameter id out of range");
  return infos_[id.index];
}

// Returns an id equal to num_params() when the name is absent.
ParamId ParamStore::find(std::string_view name) const {
  auto it = std::find_if(infos_.begin(), infos_.end(),
                         [&](const ParamInfo& p) { return p.name == name; });
  return ParamId{static_cast<std::uint32_t>(it - infos_.begin())};
}

std::span<double> ParamStore::values(ParamId id) {
  const auto& p = info(id);
  return std::span<double>(values_).subspan(p.offset, p.size);
}

std::span<const double> ParamStore::values(ParamId id) const {
  const auto& p = info(id);
  return std::span<const double>(values_).subspan(p.offset, p.size);
}

std::span<double> ParamStore::grads(ParamId id) {
  const auto& p = info(id);
  return std::span<double>(grads_).subspan(p.offset, p.size);
}

std::span<const double> ParamStore::grads(ParamId id) const {
  const auto& p = info(id);
  return std::span<const double>(grads_).subspan(p.offset, p.size);
}

void ParamStore::zero_grad() { std::fill(grads_.begin(), grads_.end(), 0.0); }

}  // namespace convcl
