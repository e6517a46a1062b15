#include "direcnet/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

#include "direcnet/error.hpp"
#include "direcnet/io.hpp"

namespace direcnet {

void ScoringConfig::validate() const {
  if (!(a < b)) throw ConfigError("scoring: normalization range needs a < b");
  if (!(c > 0) || !std::isfinite(c)) throw ConfigError("scoring: C must be positive and finite");
  if (!std::isfinite(f1_exponent_scale)) throw ConfigError("scoring: f1 exponent scale must be finite");
  for (double l : lambdas) {
    if (!(l >= 0 && l <= 1)) throw ConfigError("scoring: lambda values must be in [0, 1]");
  }
}

std::vector<double> normalize_minmax(std::span<const double> x, double a, double b) {
  if (x.size() < 2) throw ValueError("normalize_minmax: needs at least two values");
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double min = *lo, max = *hi;
  if (!(max > min)) throw ValueError("normalize_minmax: degenerate range (all values equal)");
  std::vector<double> out;
  out.reserve(x.size());
  for (double v : x) out.push_back((b - a) * (v - min) / (max - min) + a);
  return out;
}

double score1(double f1_norm, double fps_norm, double lambda) {
  return lambda * f1_norm + (1 - lambda) * fps_norm;
}

double score2(double weighted_f1, double fps, const ScoringConfig& config) {
  return std::exp2(config.f1_exponent_scale * weighted_f1) * fps / config.c;
}

namespace {

std::string lambda_label(double lambda) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "score1_%g", lambda);
  return buf;
}

}  // namespace

std::vector<std::string> ScoreTable::columns() const {
  std::vector<std::string> cols{"model", "weighted_f1", "fps", "f1_norm", "fps_norm"};
  for (double l : lambdas) cols.push_back(lambda_label(l));
  cols.push_back("score2");
  return cols;
}

void ScoreTable::sort_by(std::string_view column, bool descending) {
  const auto cols = columns();
  const auto it = std::find(cols.begin(), cols.end(), column);
  if (it == cols.end()) throw ConfigError("score table has no column '" + std::string(column) + "'");
  const auto idx = static_cast<std::size_t>(it - cols.begin());
  if (idx == 0) {
    std::stable_sort(rows.begin(), rows.end(), [&](const auto& x, const auto& y) {
      return descending ? x.input.model > y.input.model : x.input.model < y.input.model;
    });
    return;
  }
  auto value = [&](const ScoreTableRow& r) {
    switch (idx) {
      case 1: return r.input.weighted_f1;
      case 2: return r.input.fps;
      case 3: return r.f1_norm;
      case 4: return r.fps_norm;
      default: break;
    }
    return idx - 5 < r.score1.size() ? r.score1[idx - 5] : r.score2;
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const auto& x, const auto& y) {
    return descending ? value(x) > value(y) : value(x) < value(y);
  });
}

ScoreTable build_score_table(std::vector<ScoreRow> rows, const ScoringConfig& config) {
  config.validate();
  if (rows.size() < 2) throw ValueError("score table needs at least two rows");
  std::vector<double> f1, fps;
  for (const auto& r : rows) {
    if (!(r.weighted_f1 >= 0 && r.weighted_f1 <= 1)) {
      throw ValueError("row '" + r.model + "': weighted F1 must be in [0, 1]");
    }
    if (!(r.fps > 0) || !std::isfinite(r.fps)) throw ValueError("row '" + r.model + "': fps must be positive");
    f1.push_back(r.weighted_f1);
    fps.push_back(r.fps);
  }
  std::vector<double> f1n, fpsn;
  try {
    f1n = normalize_minmax(f1, config.a, config.b);
  } catch (const ValueError& e) {
    throw ValueError(std::string("weighted_f1 column: ") + e.what());
  }
  try {
    fpsn = normalize_minmax(fps, config.a, config.b);
  } catch (const ValueError& e) {
    throw ValueError(std::string("fps column: ") + e.what());
  }
  ScoreTable table;
  table.lambdas = config.lambdas;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ScoreTableRow row;
    row.input = std::move(rows[i]);
    row.f1_norm = f1n[i];
    row.fps_norm = fpsn[i];
    for (double l : config.lambdas) row.score1.push_back(score1(f1n[i], fpsn[i], l));
    row.score2 = score2(row.input.weighted_f1, row.input.fps, config);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::vector<ScoreRow> parse_score_rows(std::string_view text) {
  std::vector<ScoreRow> rows;
  std::int64_t line_no = 0;
  bool first_content = true;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    auto line = trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto c1 = line.rfind(',');
    const auto c0 = c1 == std::string_view::npos || c1 == 0 ? std::string_view::npos : line.rfind(',', c1 - 1);
    const std::string where = "rows line " + std::to_string(line_no) + ": ";
    if (c0 == std::string_view::npos) throw FormatError(where + "expected 'name,weighted_f1,fps'");
    ScoreRow r;
    r.model = std::string(trim(line.substr(0, c0)));
    const auto f1_text = line.substr(c0 + 1, c1 - c0 - 1), fps_text = line.substr(c1 + 1);
    auto numeric = [](std::string_view t) {
      try {
        (void)parse_double(t, "");
        return true;
      } catch (const FormatError&) {
        return false;
      }
    };
    // A leading line whose value fields are both non-numeric is a header.
    const bool header = first_content && !numeric(f1_text) && !numeric(fps_text);
    first_content = false;
    if (header) continue;
    try {
      r.weighted_f1 = parse_double(f1_text, "weighted_f1");
      r.fps = parse_double(fps_text, "fps");
    } catch (const FormatError& e) {
      throw FormatError(where + e.what());
    }
    if (r.model.empty()) throw FormatError(where + "empty model name");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string score_table_csv(const ScoreTable& table) {
  std::string out;
  const auto cols = table.columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  char buf[64];
  for (const auto& r : table.rows) {
    out += r.input.model;
    std::snprintf(buf, sizeof buf, ",%.3f,%.2f,%.3f,%.3f", r.input.weighted_f1, r.input.fps, r.f1_norm, r.fps_norm);
    out += buf;
    for (double s : r.score1) {
      std::snprintf(buf, sizeof buf, ",%.3f", s);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.3f\n", r.score2);
    out += buf;
  }
  return out;
}

std::string score_table_json(const ScoreTable& table) {
  nlohmann::json j;
  j["lambdas"] = table.lambdas;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : table.rows) {
    j["rows"].push_back({{"model", r.input.model},
                         {"weighted_f1", r.input.weighted_f1},
                         {"fps", r.input.fps},
                         {"f1_norm", r.f1_norm},
                         {"fps_norm", r.fps_norm},
                         {"score1", r.score1},
                         {"score2", r.score2}});
  }
  return j.dump(2) + "\n";
}

}  // namespace direcnet
