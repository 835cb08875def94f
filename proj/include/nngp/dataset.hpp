#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "nngp/errors.hpp"

namespace nngp {

using Index = Eigen::Index;
using IndexList = std::vector<Index>;
using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

enum class ColumnKind { Continuous, Binary };

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Incomplete n x p table. `mask(i, j)` is true when cell (i, j) is observed;
/// the value stored under an unobserved cell is never read.
struct Dataset {
  Eigen::MatrixXd values;
  MaskMatrix mask;
  std::vector<ColumnKind> column_kinds;
  std::optional<Index> response_col;
  std::vector<std::string> column_names;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }

  /// Wraps a matrix, treating NaN cells as missing.
  static Dataset from_values(Eigen::MatrixXd values) {
    Dataset d;
    d.mask = values.array().isNaN() == false;
    d.values = std::move(values);
    d.column_kinds.assign(static_cast<std::size_t>(d.values.cols()), ColumnKind::Continuous);
    return d;
  }

  static Dataset complete(Eigen::MatrixXd values) {
    Dataset d;
    d.mask = MaskMatrix::Constant(values.rows(), values.cols(), true);
    d.values = std::move(values);
    d.column_kinds.assign(static_cast<std::size_t>(d.values.cols()), ColumnKind::Continuous);
    return d;
  }

  void validate() const {
    if (mask.rows() != values.rows() || mask.cols() != values.cols())
      throw dimension_error("dataset: mask and values differ in shape");
    if (!column_kinds.empty() && static_cast<Index>(column_kinds.size()) != cols())
      throw dimension_error("dataset: column kind count does not match column count");
    if (!column_names.empty() && static_cast<Index>(column_names.size()) != cols())
      throw dimension_error("dataset: column name count does not match column count");
    for (Index j = 0; j < cols() && !column_kinds.empty(); ++j) {
      if (column_kinds[static_cast<std::size_t>(j)] != ColumnKind::Binary) continue;
      for (Index i = 0; i < rows(); ++i)
        if (mask(i, j) && values(i, j) != 0.0 && values(i, j) != 1.0)
          throw encoding_error("binary column " + std::to_string(j) + " holds value " +
                               std::to_string(values(i, j)) + " at row " + std::to_string(i));
    }
    if (response_col) {
      if (*response_col < 0 || *response_col >= cols())
        throw validation_error("dataset: response column out of range");
      if (!mask.col(*response_col).all())
        throw validation_error("dataset: response column must be fully observed");
    }
  }

  ColumnKind kind(Index j) const {
    return column_kinds.empty() ? ColumnKind::Continuous
                                : column_kinds[static_cast<std::size_t>(j)];
  }

  /// Values with NaN written under every unobserved cell.
  Eigen::MatrixXd values_with_nan() const {
    return mask.select(values, Eigen::MatrixXd::Constant(rows(), cols(), kMissing));
  }
};

/// Rows grouped by identical missingness. Pattern 0 holds the complete cases
/// when any exist; patterns are ordered by ascending missing-column count,
/// ties broken by first occurring row.
struct PatternPartition {
  std::vector<IndexList> rows;
  std::vector<IndexList> obs_cols;
  std::vector<IndexList> mis_cols;

  std::size_t k() const { return rows.size(); }
  bool has_complete_cases() const { return !mis_cols.empty() && mis_cols.front().empty(); }

  /// Row index set of every pattern except `pattern`, ascending.
  IndexList complement_rows(std::size_t pattern) const {
    IndexList out;
    for (std::size_t q = 0; q < rows.size(); ++q)
      if (q != pattern) out.insert(out.end(), rows[q].begin(), rows[q].end());
    std::sort(out.begin(), out.end());
    return out;
  }

  Index row_count() const {
    Index n = 0;
    for (const auto& r : rows) n += static_cast<Index>(r.size());
    return n;
  }
};

inline PatternPartition detect_patterns(const Dataset& dataset) {
  const Index n = dataset.rows(), p = dataset.cols();
  if (n < 1 || p < 1) throw dimension_error("detect_patterns: empty dataset");
  if (dataset.mask.rows() != n || dataset.mask.cols() != p)
    throw dimension_error("detect_patterns: mask and values differ in shape");

  std::unordered_map<std::string, std::size_t> index_of;
  std::vector<IndexList> groups;
  std::vector<std::string> keys;
  std::string key(static_cast<std::size_t>(p), '0');
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) key[static_cast<std::size_t>(j)] = dataset.mask(i, j) ? '1' : '0';
    auto [it, inserted] = index_of.try_emplace(key, groups.size());
    if (inserted) {
      groups.emplace_back();
      keys.push_back(key);
    }
    groups[it->second].push_back(i);
  }

  std::vector<std::size_t> missing_count(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g)
    missing_count[g] = static_cast<std::size_t>(std::count(keys[g].begin(), keys[g].end(), '0'));
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  // Groups were created in first-occurrence order, so a stable sort keeps that tie-break.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return missing_count[a] < missing_count[b];
  });

  PatternPartition partition;
  for (std::size_t g : order) {
    partition.rows.push_back(groups[g]);
    IndexList obs, mis;
    for (Index j = 0; j < p; ++j) (keys[g][static_cast<std::size_t>(j)] == '1' ? obs : mis).push_back(j);
    partition.obs_cols.push_back(std::move(obs));
    partition.mis_cols.push_back(std::move(mis));
  }
  return partition;
}

/// Checks an externally supplied partition against the dataset's mask.
inline void assert_k_pattern(const Dataset& dataset, const PatternPartition& partition) {
  const Index n = dataset.rows(), p = dataset.cols();
  if (partition.obs_cols.size() != partition.k() || partition.mis_cols.size() != partition.k())
    throw validation_error("partition: row and column set counts differ");
  std::vector<int> seen(static_cast<std::size_t>(n), -1);
  for (std::size_t q = 0; q < partition.k(); ++q) {
    std::vector<int> col_state(static_cast<std::size_t>(p), 0);
    for (Index j : partition.obs_cols[q]) {
      if (j < 0 || j >= p) throw validation_error("partition: column out of range");
      col_state[static_cast<std::size_t>(j)] += 1;
    }
    for (Index j : partition.mis_cols[q]) {
      if (j < 0 || j >= p) throw validation_error("partition: column out of range");
      col_state[static_cast<std::size_t>(j)] += 2;
    }
    for (Index j = 0; j < p; ++j) {
      const int s = col_state[static_cast<std::size_t>(j)];
      if (s != 1 && s != 2)
        throw validation_error("partition: pattern " + std::to_string(q) + " does not split column " +
                               std::to_string(j) + " into exactly one of obs/mis");
    }
    for (Index i : partition.rows[q]) {
      if (i < 0 || i >= n) throw validation_error("partition: row " + std::to_string(i) + " out of range");
      if (seen[static_cast<std::size_t>(i)] >= 0)
        throw validation_error("partition: row " + std::to_string(i) + " appears in two patterns");
      seen[static_cast<std::size_t>(i)] = static_cast<int>(q);
      for (Index j = 0; j < p; ++j) {
        const bool observed = col_state[static_cast<std::size_t>(j)] == 1;
        if (dataset.mask(i, j) != observed)
          throw validation_error("partition: row " + std::to_string(i) +
                                 " disagrees with pattern " + std::to_string(q) + " at column " +
                                 std::to_string(j));
      }
    }
  }
  for (Index i = 0; i < n; ++i)
    if (seen[static_cast<std::size_t>(i)] < 0)
      throw validation_error("partition: row " + std::to_string(i) + " is not assigned to a pattern");
}

inline void assert_k_pattern(const Dataset& dataset) {
  assert_k_pattern(dataset, detect_patterns(dataset));
}

/// True when every pattern occupies one contiguous block of rows.
inline bool rows_grouped_by_pattern(const PatternPartition& partition) {
  for (const auto& rows : partition.rows)
    for (std::size_t t = 1; t < rows.size(); ++t)
      if (rows[t] != rows[t - 1] + 1) return false;
  return true;
}

/// Stable row order that places each pattern's rows in one block, in
/// partition order. `order[r]` is the original index of sorted row r.
inline IndexList pattern_row_order(const PatternPartition& partition) {
  IndexList order;
  order.reserve(static_cast<std::size_t>(partition.row_count()));
  for (const auto& rows : partition.rows) order.insert(order.end(), rows.begin(), rows.end());
  return order;
}

inline Dataset select_rows(const Dataset& dataset, const IndexList& rows) {
  Dataset out;
  out.values = dataset.values(rows, Eigen::all);
  out.mask = dataset.mask(rows, Eigen::all);
  out.column_kinds = dataset.column_kinds;
  out.response_col = dataset.response_col;
  out.column_names = dataset.column_names;
  return out;
}

/// Records how each binary column was split into two indicator columns.
struct BinaryEncoding {
  struct Pair {
    Index original;
    Index class0;
    Index class1;
  };
  std::vector<Pair> pairs;
  IndexList source_column;  // encoded column -> original column
  Index original_cols = 0;
  Index encoded_cols = 0;
};

/// Replaces every Binary column by adjacent class-0 / class-1 columns holding
/// +-0.5 (0.5 marks the true class). Both columns inherit the original mask.
inline std::pair<Dataset, BinaryEncoding> encode_binary(const Dataset& dataset) {
  dataset.validate();
  const Index n = dataset.rows(), p = dataset.cols();
  BinaryEncoding enc;
  enc.original_cols = p;
  for (Index j = 0; j < p; ++j) {
    enc.source_column.push_back(j);
    if (dataset.kind(j) == ColumnKind::Binary) enc.source_column.push_back(j);
  }
  enc.encoded_cols = static_cast<Index>(enc.source_column.size());

  Dataset out;
  out.values = Eigen::MatrixXd::Constant(n, enc.encoded_cols, kMissing);
  out.mask = MaskMatrix::Constant(n, enc.encoded_cols, false);
  Index c = 0;
  for (Index j = 0; j < p; ++j, ++c) {
    const std::string name = dataset.column_names.empty() ? std::string{}
                                                          : dataset.column_names[static_cast<std::size_t>(j)];
    if (dataset.response_col && *dataset.response_col == j) out.response_col = c;
    if (dataset.kind(j) != ColumnKind::Binary) {
      out.values.col(c) = dataset.values.col(j);
      out.mask.col(c) = dataset.mask.col(j);
      out.column_kinds.push_back(ColumnKind::Continuous);
      if (!dataset.column_names.empty()) out.column_names.push_back(name);
      continue;
    }
    enc.pairs.push_back({j, c, c + 1});
    for (Index i = 0; i < n; ++i) {
      out.mask(i, c) = out.mask(i, c + 1) = dataset.mask(i, j);
      if (!dataset.mask(i, j)) continue;
      const double v = dataset.values(i, j);
      if (v != 0.0 && v != 1.0)
        throw encoding_error("encode_binary: value " + std::to_string(v) + " at (" +
                             std::to_string(i) + ", " + std::to_string(j) + ") is not 0 or 1");
      out.values(i, c) = v == 1.0 ? -0.5 : 0.5;
      out.values(i, c + 1) = v == 1.0 ? 0.5 : -0.5;
    }
    out.column_kinds.push_back(ColumnKind::Continuous);
    out.column_kinds.push_back(ColumnKind::Continuous);
    if (!dataset.column_names.empty()) {
      out.column_names.push_back(name + "=0");
      out.column_names.push_back(name + "=1");
    }
    ++c;
  }
  return {std::move(out), std::move(enc)};
}

/// Collapses each encoded pair back to 0/1 by argmax; exact ties give 0.
inline Eigen::MatrixXd decode_binary(const Eigen::Ref<const Eigen::MatrixXd>& imputed,
                                     const BinaryEncoding& encoding) {
  if (imputed.cols() != encoding.encoded_cols)
    throw dimension_error("decode_binary: matrix has " + std::to_string(imputed.cols()) +
                          " columns, encoding expects " + std::to_string(encoding.encoded_cols));
  Eigen::MatrixXd out(imputed.rows(), encoding.original_cols);
  std::vector<bool> binary(static_cast<std::size_t>(encoding.original_cols), false);
  for (const auto& pr : encoding.pairs) {
    out.col(pr.original) =
        (imputed.col(pr.class1).array() > imputed.col(pr.class0).array()).cast<double>();
    binary[static_cast<std::size_t>(pr.original)] = true;
  }
  for (Index c = 0; c < encoding.encoded_cols; ++c) {
    const Index src = encoding.source_column[static_cast<std::size_t>(c)];
    if (!binary[static_cast<std::size_t>(src)]) out.col(src) = imputed.col(c);
  }
  return out;
}

}  // namespace nngp
