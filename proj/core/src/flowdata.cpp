#include "sigmaforge/flowdata.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace sigmaforge {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(trim(field));
  return out;
}

// Parses a numeric cell. nullopt = not a number at all; NaN/Inf are returned
// as such so the caller can impute them.
std::optional<double> parse_cell(const std::string& cell) {
  if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::string lower;
  lower.reserve(cell.size());
  for (char c : cell) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "nan" || lower == "-nan") return std::numeric_limits<double>::quiet_NaN();
  if (lower == "inf" || lower == "infinity" || lower == "+inf" || lower == "+infinity") {
    return std::numeric_limits<double>::infinity();
  }
  if (lower == "-inf" || lower == "-infinity") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

double median_of(std::vector<double> values) {
  const std::size_t n = values.size();
  std::sort(values.begin(), values.end());
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string normalized_label(std::string_view label) { return column_key(label); }

}  // namespace

std::string_view to_string(AttackGroup group) {
  switch (group) {
    case AttackGroup::Dos: return "dos";
    case AttackGroup::Ddos: return "ddos";
    case AttackGroup::Bruteforce: return "bruteforce";
    case AttackGroup::Infiltration: return "infiltration";
  }
  return "unknown";
}

AttackGroup parse_attack_group(std::string_view text) {
  const std::string key = column_key(text);
  for (AttackGroup g : kAllGroups) {
    if (key == to_string(g)) return g;
  }
  throw std::invalid_argument("unknown attack group '" + std::string(text) + "'");
}

bool is_benign_label(std::string_view label) { return normalized_label(label) == "benign"; }

std::optional<AttackGroup> group_of_label(std::string_view label) {
  static const std::unordered_map<std::string, AttackGroup> kGroups = {
      {"doshulk", AttackGroup::Dos},
      {"dosgoldeneye", AttackGroup::Dos},
      {"dosslowloris", AttackGroup::Dos},
      {"dosslowhttptest", AttackGroup::Dos},
      {"ddos", AttackGroup::Ddos},
      {"ftppatator", AttackGroup::Bruteforce},
      {"sshpatator", AttackGroup::Bruteforce},
      {"bruteforce", AttackGroup::Bruteforce},
      {"webattackbruteforce", AttackGroup::Bruteforce},
      {"portscan", AttackGroup::Bruteforce},
      {"botnet", AttackGroup::Bruteforce},
      {"bot", AttackGroup::Bruteforce},
      {"sqlinjection", AttackGroup::Infiltration},
      {"webattacksqlinjection", AttackGroup::Infiltration},
      {"xss", AttackGroup::Infiltration},
      {"webattackxss", AttackGroup::Infiltration},
      {"heartbleed", AttackGroup::Infiltration},
      {"infiltration", AttackGroup::Infiltration},
  };
  const std::string key = normalized_label(label);
  if (key == "benign") return std::nullopt;
  const auto it = kGroups.find(key);
  if (it == kGroups.end()) {
    throw std::invalid_argument("unknown traffic label '" + std::string(label) + "'");
  }
  return it->second;
}

std::string column_key(std::string_view name) {
  std::string key;
  key.reserve(name.size());
  for (char c : name) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) key.push_back(static_cast<char>(std::tolower(u)));
  }
  return key;
}

std::size_t FeatureMatrix::count(int label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

Matrix FeatureMatrix::select(int label) const {
  Matrix out(static_cast<Eigen::Index>(count(label)), features.cols());
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) out.row(r++) = features.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

nlohmann::json NormalizationParams::to_json() const {
  return {{"c_min", c_min}, {"c_max", c_max}, {"columns", columns}};
}

NormalizationParams NormalizationParams::from_json(const nlohmann::json& j) {
  NormalizationParams p;
  p.c_min = j.at("c_min").get<std::vector<double>>();
  p.c_max = j.at("c_max").get<std::vector<double>>();
  if (j.contains("columns")) p.columns = j.at("columns").get<std::vector<std::string>>();
  if (p.c_min.size() != p.c_max.size()) {
    throw std::invalid_argument("normalization params: c_min and c_max differ in length");
  }
  for (std::size_t i = 0; i < p.c_min.size(); ++i) {
    if (p.c_min[i] > p.c_max[i]) throw std::invalid_argument("normalization params: c_min > c_max");
  }
  return p;
}

bool FunctionalMask::contains(std::size_t column) const {
  return std::binary_search(indices.begin(), indices.end(), column);
}

std::vector<std::size_t> FunctionalMask::free_indices(std::size_t dim) const {
  std::vector<std::size_t> out;
  out.reserve(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    if (!contains(i)) out.push_back(i);
  }
  return out;
}

nlohmann::json FunctionalMask::to_json() const {
  return {{"group", std::string(to_string(group))}, {"indices", indices}};
}

FunctionalMask FunctionalMask::from_json(const nlohmann::json& j) {
  FunctionalMask m;
  m.group = parse_attack_group(j.at("group").get<std::string>());
  m.indices = j.at("indices").get<std::vector<std::size_t>>();
  std::sort(m.indices.begin(), m.indices.end());
  if (std::adjacent_find(m.indices.begin(), m.indices.end()) != m.indices.end()) {
    throw std::invalid_argument("functional mask: duplicate index");
  }
  return m;
}

RawFlowTable load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file, no header row");
  const std::vector<std::string> header = split_csv_line(line);

  std::size_t label_idx = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) {
      label_idx = i;
      break;
    }
  }
  if (label_idx == header.size()) {
    const std::string wanted = column_key(label_column);
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (column_key(header[i]) == wanted) {
        label_idx = i;
        break;
      }
    }
  }
  if (label_idx == header.size()) {
    throw std::invalid_argument(path.string() + ": label column '" + label_column + "' not found");
  }

  RawFlowTable table;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i != label_idx) table.column_names.push_back(header[i]);
  }
  const std::size_t ncols = table.column_names.size();
  // Per column: did we see any parseable number (finite or not)?
  std::vector<bool> numeric_seen(ncols, false);
  std::vector<std::vector<std::size_t>> bad_cells(ncols);

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(ncols);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i == label_idx) continue;
      const std::size_t c = row.size();
      const std::optional<double> v = parse_cell(cells[i]);
      if (v) numeric_seen[c] = true;
      const double value = v.value_or(std::numeric_limits<double>::quiet_NaN());
      if (!std::isfinite(value)) bad_cells[c].push_back(table.rows.size());
      row.push_back(value);
    }
    const std::string& label = cells[label_idx];
    try {
      (void)group_of_label(label);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    table.rows.push_back(std::move(row));
    table.labels.push_back(label);
  }

  for (std::size_t c = 0; c < ncols; ++c) {
    if (!table.rows.empty() && !numeric_seen[c]) {
      throw std::invalid_argument(path.string() + ": column '" + table.column_names[c] +
                                  "' is entirely non-numeric");
    }
    if (bad_cells[c].empty()) continue;
    std::vector<double> finite;
    finite.reserve(table.rows.size());
    for (const auto& row : table.rows) {
      if (std::isfinite(row[c])) finite.push_back(row[c]);
    }
    if (finite.empty()) {
      throw std::invalid_argument(path.string() + ": column '" + table.column_names[c] +
                                  "' has no finite values");
    }
    const double med = median_of(std::move(finite));
    for (std::size_t r : bad_cells[c]) table.rows[r][c] = med;
  }
  return table;
}

RawFlowTable drop_constant_columns(const RawFlowTable& table) {
  if (table.rows.empty()) throw std::invalid_argument("drop_constant_columns: empty table");
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < table.num_columns(); ++c) {
    const double first = table.rows.front()[c];
    const bool varies = std::any_of(table.rows.begin(), table.rows.end(),
                                    [&](const auto& row) { return row[c] != first; });
    if (varies) keep.push_back(c);
  }
  if (keep.empty()) throw std::invalid_argument("drop_constant_columns: every column is constant");

  RawFlowTable out;
  out.labels = table.labels;
  for (std::size_t c : keep) out.column_names.push_back(table.column_names[c]);
  out.rows.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    std::vector<double> r;
    r.reserve(keep.size());
    for (std::size_t c : keep) r.push_back(row[c]);
    out.rows.push_back(std::move(r));
  }
  return out;
}

NormalizationParams fit_normalizer(const Matrix& train_features) {
  if (train_features.rows() < 1) throw std::invalid_argument("fit_normalizer: no rows");
  NormalizationParams p;
  p.c_min.resize(static_cast<std::size_t>(train_features.cols()));
  p.c_max.resize(p.c_min.size());
  for (Eigen::Index c = 0; c < train_features.cols(); ++c) {
    p.c_min[static_cast<std::size_t>(c)] = train_features.col(c).minCoeff();
    p.c_max[static_cast<std::size_t>(c)] = train_features.col(c).maxCoeff();
  }
  return p;
}

Matrix apply_normalizer(const NormalizationParams& params, const Matrix& features) {
  if (static_cast<std::size_t>(features.cols()) != params.c_min.size()) {
    throw std::invalid_argument("apply_normalizer: expected " + std::to_string(params.c_min.size()) +
                                " columns, got " + std::to_string(features.cols()));
  }
  Matrix out(features.rows(), features.cols());
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    const double lo = params.c_min[static_cast<std::size_t>(c)];
    const double range = params.c_max[static_cast<std::size_t>(c)] - lo;
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
      out(r, c) = range > 0.0 ? std::clamp((features(r, c) - lo) / range, 0.0, 1.0) : 0.0;
    }
  }
  return out;
}

Matrix invert_normalizer(const NormalizationParams& params, const Matrix& normalized) {
  if (static_cast<std::size_t>(normalized.cols()) != params.c_min.size()) {
    throw std::invalid_argument("invert_normalizer: column count mismatch");
  }
  Matrix out(normalized.rows(), normalized.cols());
  for (Eigen::Index c = 0; c < normalized.cols(); ++c) {
    const double lo = params.c_min[static_cast<std::size_t>(c)];
    const double range = params.c_max[static_cast<std::size_t>(c)] - lo;
    out.col(c) = (normalized.col(c).array() * range + lo).matrix();
  }
  return out;
}

FeatureMatrix build_binary_dataset(const RawFlowTable& table, AttackGroup group, std::uint64_t seed) {
  std::vector<std::size_t> attacks;
  std::vector<std::size_t> benign;
  for (std::size_t i = 0; i < table.labels.size(); ++i) {
    const std::optional<AttackGroup> g = group_of_label(table.labels[i]);
    if (!g) {
      benign.push_back(i);
    } else if (*g == group) {
      attacks.push_back(i);
    }
  }
  if (attacks.empty()) {
    throw std::invalid_argument("build_binary_dataset: no '" + std::string(to_string(group)) +
                                "' attacks in table");
  }
  if (benign.empty()) throw std::invalid_argument("build_binary_dataset: no benign rows in table");

  Rng rng = make_rng(seed, "balance");
  auto subsample = [&rng](std::vector<std::size_t>& idx, std::size_t n) {
    if (idx.size() <= n) return;
    shuffle(idx.begin(), idx.end(), rng);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
  };
  const std::size_t n = std::min(attacks.size(), benign.size());
  subsample(benign, n);
  subsample(attacks, n);

  std::vector<std::size_t> keep;
  keep.reserve(2 * n);
  std::merge(attacks.begin(), attacks.end(), benign.begin(), benign.end(), std::back_inserter(keep));

  FeatureMatrix out;
  out.columns = table.column_names;
  out.features.resize(static_cast<Eigen::Index>(keep.size()),
                      static_cast<Eigen::Index>(table.num_columns()));
  out.labels.reserve(keep.size());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto& row = table.rows[keep[r]];
    for (std::size_t c = 0; c < row.size(); ++c) {
      out.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
    out.labels.push_back(is_benign_label(table.labels[keep[r]]) ? 0 : 1);
  }
  return out;
}

DatasetSplit split_train_test(const FeatureMatrix& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("split_train_test: test_fraction must lie in (0,1)");
  }
  const std::size_t n = data.rows();
  if (n < 2) throw std::invalid_argument("split_train_test: need at least 2 rows");

  Rng rng = make_rng(seed, "split");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[data.labels[i] != 0 ? 1 : 0].push_back(i);

  // Largest-remainder allocation of round(n * f) test rows across classes.
  std::size_t n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  std::array<std::size_t, 2> quota{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double exact = static_cast<double>(by_class[c].size()) * static_cast<double>(n_test) /
                         static_cast<double>(n);
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - std::floor(exact);
    assigned += quota[c];
  }
  while (assigned < n_test) {
    const int c = remainder[1] > remainder[0] ? 1 : 0;
    if (quota[c] < by_class[c].size()) ++quota[c];
    else ++quota[1 - c];
    remainder[c] = -1.0;
    ++assigned;
  }

  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (int c = 0; c < 2; ++c) {
    shuffle(by_class[c].begin(), by_class[c].end(), rng);
    test_idx.insert(test_idx.end(), by_class[c].begin(), by_class[c].begin() + static_cast<long>(quota[c]));
    train_idx.insert(train_idx.end(), by_class[c].begin() + static_cast<long>(quota[c]), by_class[c].end());
  }
  shuffle(train_idx.begin(), train_idx.end(), rng);
  shuffle(test_idx.begin(), test_idx.end(), rng);

  auto gather = [&data](const std::vector<std::size_t>& idx) {
    FeatureMatrix m;
    m.columns = data.columns;
    m.features.resize(static_cast<Eigen::Index>(idx.size()), data.features.cols());
    m.labels.reserve(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      m.features.row(static_cast<Eigen::Index>(r)) = data.features.row(static_cast<Eigen::Index>(idx[r]));
      m.labels.push_back(data.labels[idx[r]]);
    }
    return m;
  };
  return {gather(train_idx), gather(test_idx)};
}

const std::vector<std::string>& cicids_feature_names() {
  static const std::vector<std::string> kNames = {
      "Destination Port", "Flow Duration", "Total Fwd Packets", "Total Backward Packets",
      "Total Length of Fwd Packets", "Total Length of Bwd Packets", "Fwd Packet Length Max",
      "Fwd Packet Length Min", "Fwd Packet Length Mean", "Fwd Packet Length Std",
      "Bwd Packet Length Max", "Bwd Packet Length Min", "Bwd Packet Length Mean",
      "Bwd Packet Length Std", "Flow Bytes/s", "Flow Packets/s", "Flow IAT Mean", "Flow IAT Std",
      "Flow IAT Max", "Flow IAT Min", "Fwd IAT Total", "Fwd IAT Mean", "Fwd IAT Std", "Fwd IAT Max",
      "Fwd IAT Min", "Bwd IAT Total", "Bwd IAT Mean", "Bwd IAT Std", "Bwd IAT Max", "Bwd IAT Min",
      "Fwd PSH Flags", "Fwd URG Flags", "Fwd Header Length", "Bwd Header Length", "Fwd Packets/s",
      "Bwd Packets/s", "Min Packet Length", "Max Packet Length", "Packet Length Mean",
      "Packet Length Std", "Packet Length Variance", "FIN Flag Count", "SYN Flag Count",
      "RST Flag Count", "PSH Flag Count", "ACK Flag Count", "URG Flag Count", "CWE Flag Count",
      "ECE Flag Count", "Down/Up Ratio", "Average Packet Size", "Avg Fwd Segment Size",
      "Avg Bwd Segment Size", "Fwd Header Length.1", "Subflow Fwd Packets", "Subflow Fwd Bytes",
      "Subflow Bwd Packets", "Subflow Bwd Bytes", "Init_Win_bytes_forward",
      "Init_Win_bytes_backward", "act_data_pkt_fwd", "min_seg_size_forward", "Active Mean",
      "Active Std", "Active Max", "Active Min", "Idle Mean", "Idle Std", "Idle Max", "Idle Min"};
  return kNames;
}

const std::vector<std::string>& functional_feature_names(AttackGroup group) {
  static const std::vector<std::string> kDos = {
      "Flow Duration", "Active Mean", "Average Packet Size", "Packet Length Std",
      "Flow IAT Mean", "PSH Flag Count", "Idle Max"};
  static const std::vector<std::string> kDdos = {
      "Flow Duration", "Bwd Packet Length Std", "Average Packet Size", "Packet Length Std",
      "Flow IAT Std", "ACK Flag Count"};
  static const std::vector<std::string> kBruteforce = {
      "PSH Flag Count", "Flow Duration", "Total Length of Fwd Packets", "Init Win bytes forward",
      "Packet Length Std", "Subflow Fwd Bytes", "Fwd PSH Flags"};
  static const std::vector<std::string> kInfiltration = {
      "Subflow Fwd Bytes", "Total Length of Fwd Packets", "Flow Duration", "Idle Mean",
      "Active Mean", "Init Win bytes backward", "PSH Flag Count"};
  switch (group) {
    case AttackGroup::Dos: return kDos;
    case AttackGroup::Ddos: return kDdos;
    case AttackGroup::Bruteforce: return kBruteforce;
    case AttackGroup::Infiltration: return kInfiltration;
  }
  return kDos;
}

FunctionalMask functional_mask_for(AttackGroup group, const std::vector<std::string>& column_names,
                                   const ColumnAliases& aliases) {
  std::unordered_map<std::string, std::size_t> by_key;
  for (std::size_t i = 0; i < column_names.size(); ++i) {
    by_key.emplace(column_key(column_names[i]), i);
  }
  FunctionalMask mask;
  mask.group = group;
  for (const std::string& name : functional_feature_names(group)) {
    std::string lookup = name;
    if (const auto it = aliases.find(name); it != aliases.end()) lookup = it->second;
    const auto found = by_key.find(column_key(lookup));
    if (found == by_key.end()) {
      throw std::invalid_argument("functional feature '" + name + "' (" + std::string(to_string(group)) +
                                  ") not found among dataset columns");
    }
    mask.indices.push_back(found->second);
  }
  std::sort(mask.indices.begin(), mask.indices.end());
  mask.indices.erase(std::unique(mask.indices.begin(), mask.indices.end()), mask.indices.end());
  return mask;
}

FeatureMatrix synth_dataset(AttackGroup group, std::size_t n_per_class, double separation,
                            std::uint64_t seed) {
  if (n_per_class < 10) throw std::invalid_argument("synth_dataset: n_per_class must be >= 10");
  if (!(separation > 0.0)) throw std::invalid_argument("synth_dataset: separation must be > 0");

  constexpr std::size_t kInformative = 20;
  constexpr int kBenignComponents = 2;
  constexpr int kAttackComponents = 3;
  constexpr double kComponentJitter = 0.25;
  constexpr double kMaskSpread = 0.75;
  constexpr double kMaskShift = 1.5;

  const std::vector<std::string>& names = cicids_feature_names();
  const std::size_t dim = names.size();
  const FunctionalMask mask = functional_mask_for(group, names);

  Rng rng = make_rng(seed, "synth", static_cast<std::uint64_t>(group));

  std::vector<std::size_t> free = mask.free_indices(dim);
  shuffle(free.begin(), free.end(), rng);
  std::vector<double> shift(dim, 0.0);
  for (std::size_t k = 0; k < kInformative && k < free.size(); ++k) {
    shift[free[k]] = (uniform01(rng) < 0.5 ? -1.0 : 1.0) * separation;
  }
  std::vector<double> mask_shift(dim, 0.0);
  for (std::size_t c : mask.indices) mask_shift[c] = (uniform01(rng) < 0.5 ? -1.0 : 1.0) * kMaskShift;

  // Component means. Attack components additionally carry their own
  // signature on the functional columns.
  auto component_means = [&](int n_components, bool attack) {
    std::vector<std::vector<double>> means(static_cast<std::size_t>(n_components),
                                           std::vector<double>(dim, 0.0));
    for (auto& mu : means) {
      for (std::size_t c = 0; c < dim; ++c) {
        mu[c] = kComponentJitter * standard_normal(rng);
        if (attack) {
          mu[c] += shift[c];
          if (mask.contains(c)) mu[c] += mask_shift[c] + uniform(rng, -kMaskSpread, kMaskSpread);
        }
      }
    }
    return means;
  };
  const auto benign_means = component_means(kBenignComponents, false);
  const auto attack_means = component_means(kAttackComponents, true);

  const std::size_t n = 2 * n_per_class;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle(order.begin(), order.end(), rng);

  Matrix raw(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  std::vector<int> labels(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const bool attack = k >= n_per_class;
    const auto& means = attack ? attack_means : benign_means;
    const auto& mu = means[uniform_index(rng, means.size())];
    const auto r = static_cast<Eigen::Index>(order[k]);
    for (std::size_t c = 0; c < dim; ++c) {
      raw(r, static_cast<Eigen::Index>(c)) = mu[c] + standard_normal(rng);
    }
    labels[order[k]] = attack ? 1 : 0;
  }

  FeatureMatrix out;
  out.columns = names;
  out.features = apply_normalizer(fit_normalizer(raw), raw);
  out.labels = std::move(labels);
  return out;
}

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (std::size_t c = 0; c < data.cols(); ++c) {
    out << (c < data.columns.size() ? data.columns[c] : "f" + std::to_string(c)) << ',';
  }
  out << "label\n";
  out << std::setprecision(17);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t c = 0; c < data.cols(); ++c) {
      out << data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) << ',';
    }
    out << data.labels[r] << '\n';
  }
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  std::vector<std::string> header = split_csv_line(line);
  if (header.empty() || header.back() != "label") {
    throw std::invalid_argument(path.string() + ": last column must be 'label'");
  }
  header.pop_back();

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size() + 1) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": wrong field count");
    }
    std::vector<double> row;
    row.reserve(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
      const std::optional<double> v = parse_cell(cells[c]);
      if (!v || !std::isfinite(*v)) {
        throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": bad value '" +
                                    cells[c] + "'");
      }
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
    labels.push_back(cells.back() == "0" ? 0 : 1);
  }

  FeatureMatrix m;
  m.columns = std::move(header);
  m.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  m.labels = std::move(labels);
  return m;
}

}  // namespace sigmaforge
