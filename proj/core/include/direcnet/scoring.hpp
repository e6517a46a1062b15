#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace direcnet {

struct ScoreRow {
  std::string model;
  double weighted_f1 = 0;  // in [0, 1]
  double fps = 0;          // > 0
};

struct ScoringConfig {
  // Score1 weights on the normalized F1; the first three default to the
  // balanced, accuracy-first and speed-first settings.
  std::vector<double> lambdas{0.5, 0.7, 0.3};
  double c = 1e27;
  // Target range of the min-max normalization.
  double a = 0.1;
  double b = 1.0;
  // Score2 raises 2 to f1_exponent_scale * weighted_f1.
  double f1_exponent_scale = 100;

  // Throws ConfigError.
  void validate() const;
};

/// Affine map of x onto [a, b] (min -> a, max -> b). Throws ValueError when
/// fewer than two values are given or all values are equal.
std::vector<double> normalize_minmax(std::span<const double> x, double a = 0.1, double b = 1.0);

double score1(double f1_norm, double fps_norm, double lambda);
double score2(double weighted_f1, double fps, const ScoringConfig& config = {});

struct ScoreTableRow {
  ScoreRow input;
  double f1_norm = 0;
  double fps_norm = 0;
  std::vector<double> score1;  // one per lambda
  double score2 = 0;
};

struct ScoreTable {
  std::vector<double> lambdas;
  std::vector<ScoreTableRow> rows;

  // Column names, in CSV order: model, weighted_f1, fps, f1_norm, fps_norm,
  // score1_<lambda>..., score2.
  std::vector<std::string> columns() const;
  // Stable sort; throws ConfigError for an unknown column.
  void sort_by(std::string_view column, bool descending = true);
};

/// Normalizes the F1 and FPS columns across all rows, then evaluates Score1
/// for every lambda and Score2 per row. Throws ValueError for fewer than two
/// rows, degenerate columns or out-of-domain inputs.
ScoreTable build_score_table(std::vector<ScoreRow> rows, const ScoringConfig& config = {});

/// Delimited rows `name,weighted_f1,fps`. Blank lines, '#' comments and a
/// leading header line are skipped. Throws FormatError with the line number.
std::vector<ScoreRow> parse_score_rows(std::string_view text);

// 3-decimal rendering.
std::string score_table_csv(const ScoreTable& table);
std::string score_table_json(const ScoreTable& table);

}  // namespace direcnet
