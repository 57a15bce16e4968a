#pragma once

#include "sigmaforge/random.hpp"
#include "sigmaforge/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sigmaforge {

/// A CSV of flows before any cleaning: raw feature scale, textual labels.
struct RawFlowTable {
  std::vector<std::string> column_names;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;

  std::size_t num_rows() const { return rows.size(); }
  std::size_t num_columns() const { return column_names.size(); }
};

enum class AttackGroup { Dos, Ddos, Bruteforce, Infiltration };

inline constexpr AttackGroup kAllGroups[] = {AttackGroup::Dos, AttackGroup::Ddos,
                                             AttackGroup::Bruteforce, AttackGroup::Infiltration};

/// "dos", "ddos", "bruteforce", "infiltration".
std::string_view to_string(AttackGroup group);
AttackGroup parse_attack_group(std::string_view text);

/// Maps a dataset label to its attack group. Returns nullopt for benign
/// traffic; throws for labels that are neither benign nor a known attack.
std::optional<AttackGroup> group_of_label(std::string_view label);
bool is_benign_label(std::string_view label);

/// Rows of normalized flow features with binary labels (1 = attack).
struct FeatureMatrix {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> columns;

  std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t count(int label) const;
  /// Feature rows whose label equals `label`, in original order.
  Matrix select(int label) const;
};

struct NormalizationParams {
  std::vector<double> c_min;
  std::vector<double> c_max;
  std::vector<std::string> columns;

  nlohmann::json to_json() const;
  static NormalizationParams from_json(const nlohmann::json& j);
};

struct FunctionalMask {
  AttackGroup group = AttackGroup::Dos;
  /// Sorted ascending, distinct.
  std::vector<std::size_t> indices;

  bool contains(std::size_t column) const;
  /// Complement of `indices` within [0, dim).
  std::vector<std::size_t> free_indices(std::size_t dim) const;

  nlohmann::json to_json() const;
  static FunctionalMask from_json(const nlohmann::json& j);
};

struct DatasetSplit {
  FeatureMatrix train;
  FeatureMatrix test;
};

/// Column-name aliases, e.g. {"Init Win bytes forward": "Init_Win_bytes_forward"}.
using ColumnAliases = std::map<std::string, std::string>;

/// Lower-cased, alphanumerics only: "Init_Win_bytes_forward" and
/// "Init Win bytes forward" share a key.
std::string column_key(std::string_view name);

RawFlowTable load_csv(const std::filesystem::path& path, const std::string& label_column = "Label");

RawFlowTable drop_constant_columns(const RawFlowTable& table);

NormalizationParams fit_normalizer(const Matrix& train_features);
Matrix apply_normalizer(const NormalizationParams& params, const Matrix& features);
/// Inverse of apply_normalizer for values inside [c_min, c_max].
Matrix invert_normalizer(const NormalizationParams& params, const Matrix& normalized);

/// Balanced attack-vs-benign dataset for one group. The larger class is
/// subsampled (seeded) down to the size of the smaller one; rows of other
/// attack groups are dropped. Features stay on the raw scale.
FeatureMatrix build_binary_dataset(const RawFlowTable& table, AttackGroup group,
                                   std::uint64_t seed = 0);

/// Stratified seeded split. Each class contributes round(n_class * test_fraction)
/// rows (at least one test and one train row overall).
DatasetSplit split_train_test(const FeatureMatrix& data, double test_fraction, std::uint64_t seed);

/// The 70 flow features left after dropping constant CICIDS2017 columns.
const std::vector<std::string>& cicids_feature_names();

/// Functional feature names of a group, as they appear in the CICIDS2017
/// documentation.
const std::vector<std::string>& functional_feature_names(AttackGroup group);

FunctionalMask functional_mask_for(AttackGroup group, const std::vector<std::string>& column_names,
                                   const ColumnAliases& aliases = {});

/// Synthetic stand-in for a CICIDS2017 binary dataset: 70 named columns,
/// n_per_class benign and n_per_class attack rows, min-max normalized.
FeatureMatrix synth_dataset(AttackGroup group, std::size_t n_per_class, double separation,
                            std::uint64_t seed);

/// CSV with header "<columns...>,label". Values written with round-trip precision.
void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& data);
FeatureMatrix read_feature_csv(const std::filesystem::path& path);

}  // namespace sigmaforge
