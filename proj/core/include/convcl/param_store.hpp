#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace convcl {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

struct ParamId {
  std::uint32_t index = 0;
  friend bool operator==(ParamId, ParamId) = default;
};

struct ParamInfo {
  std::string name;
  Shape shape;
  std::size_t offset = 0;  // into the flat arrays
  std::size_t size = 0;
};

/// Named, ordered collection of trainable arrays backed by one contiguous
/// value buffer and one gradient buffer. Flat index k always refers to the
/// same scalar for the life of the store, which is what the optimizer and
/// the consolidation engine rely on.
class ParamStore {
 public:
  ParamId add(std::string name, Shape shape);

  [[nodiscard]] std::size_t num_params() const { return infos_.size(); }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] const ParamInfo& info(ParamId id) const;
  [[nodiscard]] const std::vector<ParamInfo>& infos() const { return infos_; }
  [[nodiscard]] ParamId find(std::string_view name) const;

  std::span<double> values(ParamId id);
  std::span<const double> values(ParamId id) const;
  std::span<double> grads(ParamId id);
  std::span<const double> grads(ParamId id) const;

  std::span<double> flat_values() { return values_; }
  std::span<const double> flat_values() const { return values_; }
  std::span<double> flat_grads() { return grads_; }
  std::span<const double> flat_grads() const { return grads_; }

  void zero_grad();

 private:
  std::vector<ParamInfo> infos_;
  std::vector<double> values_;
  std::vector<double> grads_;
};

}  // namespace convcl
