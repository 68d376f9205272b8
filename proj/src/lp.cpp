#include "mcfnc/lp.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "interior_point.hpp"

namespace mcfnc {

std::size_t LinearProgram::add_variable(std::string name, double cost, double lower, double upper) {
  if (std::isnan(cost) || std::isnan(lower) || std::isnan(upper)) {
    throw std::invalid_argument("NaN in variable '" + name + "'");
  }
  names_.push_back(std::move(name));
  cost_.push_back(cost);
  lower_.push_back(lower);
  upper_.push_back(upper);
  return names_.size() - 1;
}

std::size_t LinearProgram::add_row(std::string name, Sense sense, double rhs) {
  if (!std::isfinite(rhs)) throw std::invalid_argument("non-finite rhs in row '" + name + "'");
  rows_.push_back({std::move(name), sense, rhs});
  return rows_.size() - 1;
}

void LinearProgram::add_coefficient(std::size_t row, std::size_t col, double value) {
  if (row >= rows_.size() || col >= names_.size()) {
    throw std::out_of_range("coefficient outside the program");
  }
  if (!std::isfinite(value)) throw std::invalid_argument("non-finite coefficient");
  if (value != 0.0) entries_.push_back({row, col, value});
}

void LinearProgram::set_bounds(std::size_t j, double lo, double up) {
  lower_.at(j) = lo;
  upper_.at(j) = up;
}

double LinearProgram::objective(const std::vector<double>& x) const {
  double v = objective_offset;
  for (std::size_t j = 0; j < cost_.size(); ++j) v += cost_[j] * x.at(j);
  return v;
}

std::vector<double> LinearProgram::row_activity(const std::vector<double>& x) const {
  std::vector<double> act(rows_.size(), 0.0);
  for (const auto& e : entries_) act[e.row] += e.value * x.at(e.col);
  return act;
}

std::vector<double> LinearProgram::row_violation(const std::vector<double>& x) const {
  const auto act = row_activity(x);
  std::vector<double> viol(rows_.size(), 0.0);
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    const double d = act[r] - rows_[r].rhs;
    switch (rows_[r].sense) {
      case Sense::leq: viol[r] = std::max(0.0, d); break;
      case Sense::geq: viol[r] = std::max(0.0, -d); break;
      case Sense::eq: viol[r] = std::abs(d); break;
    }
  }
  return viol;
}

double LinearProgram::max_violation(const std::vector<double>& x) const {
  double worst = 0.0;
  for (double v : row_violation(x)) worst = std::max(worst, v);
  for (std::size_t j = 0; j < names_.size(); ++j) {
    worst = std::max({worst, lower_[j] - x[j], x[j] - upper_[j]});
  }
  return worst;
}

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
    case LpStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Presolve and conversion to  min c'x, Ax = b, x >= 0.

namespace {

struct ColumnMap {
  enum class Kind { fixed, shifted, reflected, split };
  Kind kind{Kind::shifted};
  double value{0.0};  // fixed value, lower shift or upper reflection point
  long col{-1};
  long col_neg{-1};
};

struct Presolved {
  StandardForm form;
  std::vector<ColumnMap> map;
  std::vector<std::size_t> kept_rows;  // original row of each standard row (first block)
  bool infeasible{false};
  std::vector<std::size_t> infeasible_rows;
  std::string message;
};

Presolved presolve(const LinearProgram& lp, double tol) {
  Presolved out;
  const std::size_t n = lp.num_variables();
  const std::size_t m = lp.num_rows();
  const auto& rows = lp.rows();

  std::vector<std::vector<std::pair<std::size_t, double>>> by_row(m);
  {
    std::map<std::pair<std::size_t, std::size_t>, double> merged;
    for (const auto& e : lp.entries()) merged[{e.row, e.col}] += e.value;
    for (const auto& [rc, v] : merged) {
      if (v != 0.0) by_row[rc.first].push_back({rc.second, v});
    }
  }

  // Working bounds, tightened by singleton rows until nothing changes.
  std::vector<double> lower = lp.lower(), upper = lp.upper();
  std::vector<bool> fixed(n, false);
  std::vector<double> value(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double lo = lower[j], up = upper[j];
    if (lo > up + tol * (1.0 + std::abs(lo))) {
      out.infeasible = true;
      out.message = "variable '" + lp.variable_name(j) + "' has lower bound above upper bound";
      return out;
    }
    if (lo >= up) {
      fixed[j] = true;
      value[j] = lo;
    }
  }

  std::vector<bool> row_dropped(m, false);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t r = 0; r < m; ++r) {
      if (row_dropped[r]) continue;
      long free_col = -1;
      double coef = 0.0, rest = 0.0;
      int count = 0;
      for (const auto& [j, a] : by_row[r]) {
        if (fixed[j]) {
          rest += a * value[j];
        } else {
          ++count;
          free_col = static_cast<long>(j);
          coef = a;
        }
      }
      if (count != 1) continue;
      const double v = (rows[r].rhs - rest) / coef;
      const std::size_t j = static_cast<std::size_t>(free_col);
      const double slack = tol * (1.0 + std::abs(v));
      const auto sense = rows[r].sense;
      if (sense == LinearProgram::Sense::eq) {
        if (v < lower[j] - slack || v > upper[j] + slack) {
          out.infeasible = true;
          out.infeasible_rows.push_back(r);
          out.message = "row '" + rows[r].name + "' fixes '" + lp.variable_name(j) +
                        "' outside its bounds";
          return out;
        }
        fixed[j] = true;
        value[j] = std::clamp(v, lower[j], upper[j]);
      } else {
        // a x <= v a (leq) bounds x above when a > 0, below when a < 0.
        const bool is_upper = (sense == LinearProgram::Sense::leq) == (coef > 0.0);
        if (is_upper) {
          if (v < lower[j] - slack) {
            out.infeasible = true;
            out.infeasible_rows.push_back(r);
            out.message = "row '" + rows[r].name + "' puts '" + lp.variable_name(j) + "' below its lower bound";
            return out;
          }
          upper[j] = std::min(upper[j], std::max(v, lower[j]));
        } else {
          if (v > upper[j] + slack) {
            out.infeasible = true;
            out.infeasible_rows.push_back(r);
            out.message = "row '" + rows[r].name + "' puts '" + lp.variable_name(j) + "' above its upper bound";
            return out;
          }
          lower[j] = std::max(lower[j], std::min(v, upper[j]));
        }
        if (upper[j] - lower[j] <= slack) {
          fixed[j] = true;
          value[j] = lower[j];
        }
      }
      row_dropped[r] = true;
      changed = true;
    }
  }

  // Column layout of the standard form.
  out.map.resize(n);
  long ncols = 0;
  std::vector<double> c;
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> b;
  double offset = lp.objective_offset;
  std::vector<std::pair<long, double>> upper_rows;  // (col, width)
  for (std::size_t j = 0; j < n; ++j) {
    auto& cm = out.map[j];
    const double lo = lower[j], up = upper[j], cj = lp.costs()[j];
    if (fixed[j]) {
      cm.kind = ColumnMap::Kind::fixed;
      cm.value = value[j];
      offset += cj * value[j];
    } else if (std::isfinite(lo)) {
      cm.kind = ColumnMap::Kind::shifted;
      cm.value = lo;
      cm.col = ncols++;
      c.push_back(cj);
      offset += cj * lo;
      if (std::isfinite(up)) upper_rows.push_back({cm.col, up - lo});
    } else if (std::isfinite(up)) {
      cm.kind = ColumnMap::Kind::reflected;
      cm.value = up;
      cm.col = ncols++;
      c.push_back(-cj);
      offset += cj * up;
    } else {
      cm.kind = ColumnMap::Kind::split;
      cm.col = ncols++;
      cm.col_neg = ncols++;
      c.push_back(cj);
      c.push_back(-cj);
    }
  }

  long nrows = 0;
  for (std::size_t r = 0; r < m; ++r) {
    if (row_dropped[r]) continue;
    double rhs = rows[r].rhs;
    bool any = false;
    std::vector<Eigen::Triplet<double>> local;
    for (const auto& [j, a] : by_row[r]) {
      const auto& cm = out.map[j];
      switch (cm.kind) {
        case ColumnMap::Kind::fixed: rhs -= a * cm.value; break;
        case ColumnMap::Kind::shifted:
          rhs -= a * cm.value;
          local.emplace_back(nrows, cm.col, a);
          any = true;
          break;
        case ColumnMap::Kind::reflected:
          rhs -= a * cm.value;
          local.emplace_back(nrows, cm.col, -a);
          any = true;
          break;
        case ColumnMap::Kind::split:
          local.emplace_back(nrows, cm.col, a);
          local.emplace_back(nrows, cm.col_neg, -a);
          any = true;
          break;
      }
    }
    const auto sense = rows[r].sense;
    const double slack = tol * (1.0 + std::abs(rows[r].rhs));
    if (!any) {
      const bool ok = (sense == LinearProgram::Sense::leq && 0.0 <= rhs + slack) ||
                      (sense == LinearProgram::Sense::geq && 0.0 >= rhs - slack) ||
                      (sense == LinearProgram::Sense::eq && std::abs(rhs) <= slack);
      if (!ok) {
        out.infeasible = true;
        out.infeasible_rows.push_back(r);
        out.message = "row '" + rows[r].name + "' is violated by fixed variables";
        return out;
      }
      continue;
    }
    trip.insert(trip.end(), local.begin(), local.end());
    if (sense != LinearProgram::Sense::eq) {
      trip.emplace_back(nrows, ncols++, sense == LinearProgram::Sense::leq ? 1.0 : -1.0);
      c.push_back(0.0);
    }
    b.push_back(rhs);
    out.kept_rows.push_back(r);
    ++nrows;
  }
  for (const auto& [col, width] : upper_rows) {
    trip.emplace_back(nrows, col, 1.0);
    trip.emplace_back(nrows, ncols++, 1.0);
    c.push_back(0.0);
    b.push_back(width);
    ++nrows;
  }

  out.form.A.resize(nrows, ncols);
  out.form.A.setFromTriplets(trip.begin(), trip.end());
  out.form.A.makeCompressed();
  out.form.b = Eigen::Map<Eigen::VectorXd>(b.data(), static_cast<long>(b.size()));
  out.form.c = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<long>(c.size()));
  out.form.offset = offset;
  return out;
}

std::vector<double> recover(const Presolved& p, const Eigen::VectorXd& xs) {
  std::vector<double> x(p.map.size());
  for (std::size_t j = 0; j < p.map.size(); ++j) {
    const auto& cm = p.map[j];
    switch (cm.kind) {
      case ColumnMap::Kind::fixed: x[j] = cm.value; break;
      case ColumnMap::Kind::shifted: x[j] = cm.value + xs[cm.col]; break;
      case ColumnMap::Kind::reflected: x[j] = cm.value - xs[cm.col]; break;
      case ColumnMap::Kind::split: x[j] = xs[cm.col] - xs[cm.col_neg]; break;
    }
  }
  return x;
}

// Snaps tiny bound excursions left by the interior point back onto the bounds.
void snap_to_bounds(const LinearProgram& lp, std::vector<double>& x) {
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::clamp(x[j], lp.lower()[j], lp.upper()[j]);
}

LpResult solve_core(const LinearProgram& lp, const LpOptions& options, bool* diverged = nullptr) {
  LpResult res;
  const double feas_tol = std::max(options.tolerance, 1e-12);
  Presolved p = presolve(lp, feas_tol);
  if (p.infeasible) {
    res.status = LpStatus::infeasible;
    res.violated_rows = p.infeasible_rows;
    res.message = p.message;
    return res;
  }
  const IpmResult ipm = interior_point(p.form, options.tolerance, options.max_iterations);
  if (diverged) *diverged = ipm.primal_diverged;
  res.iterations = ipm.iterations;
  res.relative_gap = ipm.relative_gap;
  res.status = ipm.status;
  res.message = ipm.message;
  if (ipm.x.size() == p.form.A.cols()) {
    res.x = recover(p, ipm.x);
    snap_to_bounds(lp, res.x);
    res.objective = lp.objective(res.x);
    res.primal_residual = lp.max_violation(res.x);
  }
  return res;
}

// min sum of elastic violations; the rows carrying violation form the report.
std::vector<std::size_t> elastic_diagnosis(const LinearProgram& lp, const LpOptions& options,
                                           double* total_violation) {
  LinearProgram el;
  for (std::size_t j = 0; j < lp.num_variables(); ++j) {
    el.add_variable(lp.variable_name(j), 0.0, lp.lower()[j], lp.upper()[j]);
  }
  std::vector<std::pair<long, long>> elastic(lp.num_rows(), {-1, -1});
  for (std::size_t r = 0; r < lp.num_rows(); ++r) {
    const auto& row = lp.rows()[r];
    el.add_row(row.name, row.sense, row.rhs);
    if (row.sense != LinearProgram::Sense::leq) {
      elastic[r].first = static_cast<long>(el.add_variable("ep_" + std::to_string(r), 1.0));
      el.add_coefficient(r, static_cast<std::size_t>(elastic[r].first), 1.0);
    }
    if (row.sense != LinearProgram::Sense::geq) {
      elastic[r].second = static_cast<long>(el.add_variable("en_" + std::to_string(r), 1.0));
      el.add_coefficient(r, static_cast<std::size_t>(elastic[r].second), -1.0);
    }
  }
  for (const auto& e : lp.entries()) el.add_coefficient(e.row, e.col, e.value);
  LpOptions opt = options;
  opt.diagnose_infeasibility = false;
  const LpResult er = solve_core(el, opt);
  std::vector<std::size_t> rows;
  *total_violation = er.status == LpStatus::optimal ? er.objective : kInf;
  if (er.status != LpStatus::optimal) return rows;
  const double thresh = 1e3 * options.tolerance * (1.0 + er.objective);
  for (std::size_t r = 0; r < lp.num_rows(); ++r) {
    double v = 0.0;
    if (elastic[r].first >= 0) v += er.x[static_cast<std::size_t>(elastic[r].first)];
    if (elastic[r].second >= 0) v += er.x[static_cast<std::size_t>(elastic[r].second)];
    if (v > thresh) rows.push_back(r);
  }
  return rows;
}

}  // namespace

LpResult solve_lp(const LinearProgram& lp, const LpOptions& options) {
  bool diverged = false;
  LpResult res = solve_core(lp, options, &diverged);
  if (res.status == LpStatus::optimal || !options.diagnose_infeasibility) return res;
  if (res.status == LpStatus::infeasible && !res.violated_rows.empty()) return res;
  double total = 0.0;
  auto rows = elastic_diagnosis(lp, options, &total);
  const double thresh = 1e3 * options.tolerance * (1.0 + std::abs(total));
  if (std::isfinite(total) && total > thresh) {
    res.status = LpStatus::infeasible;
    res.violated_rows = std::move(rows);
    std::ostringstream msg;
    msg << "infeasible: minimum total constraint violation " << total;
    res.message = msg.str();
  } else if (std::isfinite(total) && diverged) {
    // Feasible but no optimum found: the objective is unbounded below.
    res.status = LpStatus::unbounded;
    res.message = "feasible region admits an unbounded improving direction";
  }
  return res;
}

// ---------------------------------------------------------------------------
// LP text format.

namespace {

void write_number(std::ostream& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, ptr - buf);
}

void write_term(std::ostream& out, double coef, const std::string& name) {
  out << (coef < 0.0 ? " - " : " + ");
  write_number(out, std::abs(coef));
  out << ' ' << name;
}

void write_bound_value(std::ostream& out, double v) {
  if (v == kInf) {
    out << "+inf";
  } else if (v == -kInf) {
    out << "-inf";
  } else {
    write_number(out, v);
  }
}

}  // namespace

void write_lp_text(const LinearProgram& lp, std::ostream& out) {
  out << "\\ " << lp.num_variables() << " variables, " << lp.num_rows() << " rows\n";
  out << "Minimize\n obj:";
  for (std::size_t j = 0; j < lp.num_variables(); ++j) {
    write_term(out, lp.costs()[j], lp.variable_name(j));
    if (j % 8 == 7) out << "\n";
  }
  if (lp.objective_offset != 0.0) {
    out << (lp.objective_offset < 0.0 ? " - " : " + ");
    write_number(out, std::abs(lp.objective_offset));
  }
  out << "\nSubject To\n";
  std::vector<std::vector<std::pair<std::size_t, double>>> by_row(lp.num_rows());
  for (const auto& e : lp.entries()) by_row[e.row].push_back({e.col, e.value});
  for (std::size_t r = 0; r < lp.num_rows(); ++r) {
    const auto& row = lp.rows()[r];
    out << ' ' << row.name << ':';
    std::size_t count = 0;
    for (const auto& [j, a] : by_row[r]) {
      write_term(out, a, lp.variable_name(j));
      if (++count % 8 == 0) out << "\n  ";
    }
    if (by_row[r].empty()) out << " 0";
    switch (row.sense) {
      case LinearProgram::Sense::leq: out << " <= "; break;
      case LinearProgram::Sense::geq: out << " >= "; break;
      case LinearProgram::Sense::eq: out << " = "; break;
    }
    write_number(out, row.rhs);
    out << '\n';
  }
  out << "Bounds\n";
  for (std::size_t j = 0; j < lp.num_variables(); ++j) {
    const double lo = lp.lower()[j], up = lp.upper()[j];
    const auto& name = lp.variable_name(j);
    if (lo == 0.0 && up == kInf) continue;
    if (lo == -kInf && up == kInf) {
      out << ' ' << name << " free\n";
    } else if (lo == up) {
      out << ' ' << name << " = ";
      write_number(out, lo);
      out << '\n';
    } else {
      out << ' ';
      write_bound_value(out, lo);
      out << " <= " << name << " <= ";
      write_bound_value(out, up);
      out << '\n';
    }
  }
  out << "End\n";
}

namespace {

enum class Tok { number, name, label, sign, rel, end };

struct Token {
  Tok kind;
  std::string text;
  double value{0.0};
};

bool name_char(char ch) {
  return std::isalnum(static_cast<unsigned char>(ch)) ||
         std::string_view("!\"#$%&()/,.;?@_`'{}|~[]^").find(ch) != std::string_view::npos;
}

std::vector<Token> lex(const std::string& text, std::size_t line_no) {
  std::vector<Token> toks;
  std::size_t i = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("LP text line " + std::to_string(line_no) + ": " + what);
  };
  while (i < text.size()) {
    const char ch = text[i];
    if (std::isspace(static_cast<unsigned char>(ch))) {
      ++i;
    } else if (ch == '+' || ch == '-') {
      toks.push_back({Tok::sign, std::string(1, ch)});
      ++i;
    } else if (ch == '<' || ch == '>' || ch == '=') {
      std::string op(1, ch);
      ++i;
      while (i < text.size() && (text[i] == '<' || text[i] == '>' || text[i] == '=')) op += text[i++];
      std::string norm;
      if (op.find('<') != std::string::npos) {
        norm = "<=";
      } else if (op.find('>') != std::string::npos) {
        norm = ">=";
      } else {
        norm = "=";
      }
      toks.push_back({Tok::rel, norm});
    } else if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
      const char* begin = text.c_str() + i;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      toks.push_back({Tok::number, std::string(begin, static_cast<std::size_t>(end - begin)), v});
      i += static_cast<std::size_t>(end - begin);
    } else if (name_char(ch)) {
      std::size_t j = i;
      while (j < text.size() && name_char(text[j])) ++j;
      std::string name = text.substr(i, j - i);
      i = j;
      while (i < text.size() && text[i] == ' ') ++i;
      if (i < text.size() && text[i] == ':') {
        ++i;
        toks.push_back({Tok::label, name});
      } else {
        std::string low = name;
        std::transform(low.begin(), low.end(), low.begin(), ::tolower);
        if (low == "inf" || low == "infinity") {
          toks.push_back({Tok::number, name, kInf});
        } else {
          toks.push_back({Tok::name, name});
        }
      }
    } else {
      fail(std::string("unexpected character '") + ch + "'");
    }
  }
  return toks;
}

std::string lower_trim(const std::string& s) {
  std::string t;
  for (char ch : s) {
    if (!std::isspace(static_cast<unsigned char>(ch))) t += static_cast<char>(std::tolower(ch));
  }
  return t;
}

struct Section {
  std::string name;
  std::vector<Token> tokens;
  std::vector<std::vector<Token>> lines;
};

}  // namespace

LinearProgram read_lp_text(std::istream& in) {
  std::vector<Section> sections;
  std::string line;
  std::size_t line_no = 0;
  bool ended = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto pos = line.find('\\'); pos != std::string::npos) line.erase(pos);
    const std::string key = lower_trim(line);
    if (key.empty()) continue;
    if (key == "minimize" || key == "min" || key == "minimise" || key == "maximize" ||
        key == "max" || key == "maximise") {
      sections.push_back({key.substr(0, 3) == "max" ? "max" : "min", {}, {}});
      continue;
    }
    if (key == "subjectto" || key == "st" || key == "s.t." || key == "such that") {
      sections.push_back({"st", {}, {}});
      continue;
    }
    if (key == "bounds" || key == "bound") {
      sections.push_back({"bounds", {}, {}});
      continue;
    }
    if (key == "generals" || key == "general" || key == "binaries" || key == "binary") {
      throw std::runtime_error("LP text line " + std::to_string(line_no) +
                               ": integer sections are not supported");
    }
    if (key == "end") {
      ended = true;
      break;
    }
    if (sections.empty()) {
      throw std::runtime_error("LP text line " + std::to_string(line_no) +
                               ": content before the objective section");
    }
    auto toks = lex(line, line_no);
    auto& sec = sections.back();
    sec.tokens.insert(sec.tokens.end(), toks.begin(), toks.end());
    sec.lines.push_back(std::move(toks));
  }
  if (!ended) throw std::runtime_error("LP text: missing End");

  LinearProgram lp;
  std::unordered_map<std::string, std::size_t> index;
  auto var = [&](const std::string& name) {
    auto it = index.find(name);
    if (it != index.end()) return it->second;
    const std::size_t j = lp.add_variable(name);
    index.emplace(name, j);
    return j;
  };

  // Linear expression parser shared by objective and constraints.
  auto parse_terms = [&](const std::vector<Token>& t, std::size_t& pos, auto&& on_term,
                         double& constant) {
    while (pos < t.size() && t[pos].kind != Tok::rel && t[pos].kind != Tok::label) {
      double sign = 1.0;
      while (pos < t.size() && t[pos].kind == Tok::sign) {
        if (t[pos].text == "-") sign = -sign;
        ++pos;
      }
      double coef = 1.0;
      bool has_coef = false;
      if (pos < t.size() && t[pos].kind == Tok::number) {
        coef = t[pos].value;
        has_coef = true;
        ++pos;
      }
      if (pos < t.size() && t[pos].kind == Tok::name) {
        on_term(var(t[pos].text), sign * coef);
        ++pos;
      } else if (has_coef) {
        constant += sign * coef;
      } else {
        throw std::runtime_error("LP text: malformed linear expression");
      }
    }
  };

  bool seen_objective = false;
  for (auto& sec : sections) {
    if (sec.name == "min" || sec.name == "max") {
      if (seen_objective) throw std::runtime_error("LP text: more than one objective");
      seen_objective = true;
      std::size_t pos = 0;
      if (pos < sec.tokens.size() && sec.tokens[pos].kind == Tok::label) ++pos;
      const double s = sec.name == "max" ? -1.0 : 1.0;
      double constant = 0.0;
      std::vector<std::pair<std::size_t, double>> terms;
      parse_terms(sec.tokens, pos, [&](std::size_t j, double a) { terms.push_back({j, a}); },
                  constant);
      if (pos != sec.tokens.size()) throw std::runtime_error("LP text: malformed objective");
      for (const auto& [j, a] : terms) lp.set_cost(j, lp.costs()[j] + s * a);
      lp.objective_offset = s * constant;
    } else if (sec.name == "st") {
      std::size_t pos = 0;
      const auto& t = sec.tokens;
      while (pos < t.size()) {
        std::string name = "r" + std::to_string(lp.num_rows());
        if (t[pos].kind == Tok::label) name = t[pos++].text;
        double constant = 0.0;
        std::vector<std::pair<std::size_t, double>> terms;
        parse_terms(t, pos, [&](std::size_t j, double a) { terms.push_back({j, a}); }, constant);
        if (pos >= t.size() || t[pos].kind != Tok::rel) {
          throw std::runtime_error("LP text: constraint '" + name + "' lacks a relation");
        }
        const std::string rel = t[pos++].text;
        double sign = 1.0;
        while (pos < t.size() && t[pos].kind == Tok::sign) {
          if (t[pos].text == "-") sign = -sign;
          ++pos;
        }
        if (pos >= t.size() || t[pos].kind != Tok::number) {
          throw std::runtime_error("LP text: constraint '" + name + "' lacks a right-hand side");
        }
        const double rhs = sign * t[pos++].value - constant;
        const auto sense = rel == "<="   ? LinearProgram::Sense::leq
                           : rel == ">=" ? LinearProgram::Sense::geq
                                         : LinearProgram::Sense::eq;
        const std::size_t r = lp.add_row(name, sense, rhs);
        for (const auto& [j, a] : terms) lp.add_coefficient(r, j, a);
      }
    } else if (sec.name == "bounds") {
      for (const auto& t : sec.lines) {
        // Signed numbers first.
        std::vector<Token> v;
        for (std::size_t i = 0; i < t.size(); ++i) {
          if (t[i].kind == Tok::sign && i + 1 < t.size() && t[i + 1].kind == Tok::number) {
            Token num = t[i + 1];
            if (t[i].text == "-") num.value = -num.value;
            v.push_back(num);
            ++i;
          } else {
            v.push_back(t[i]);
          }
        }
        auto bad = [] { return std::runtime_error("LP text: malformed bound"); };
        if (v.size() == 2 && v[0].kind == Tok::name && v[1].kind == Tok::name) {
          std::string w = v[1].text;
          std::transform(w.begin(), w.end(), w.begin(), ::tolower);
          if (w != "free") throw bad();
          lp.set_bounds(var(v[0].text), -kInf, kInf);
        } else if (v.size() == 5 && v[0].kind == Tok::number && v[2].kind == Tok::name &&
                   v[4].kind == Tok::number && v[1].text == "<=" && v[3].text == "<=") {
          lp.set_bounds(var(v[2].text), v[0].value, v[4].value);
        } else if (v.size() == 3 && v[0].kind == Tok::name && v[2].kind == Tok::number) {
          const std::size_t j = var(v[0].text);
          if (v[1].text == "<=") {
            lp.set_bounds(j, v[2].value < 0.0 && lp.lower()[j] == 0.0 ? -kInf : lp.lower()[j],
                          v[2].value);
          } else if (v[1].text == ">=") {
            lp.set_bounds(j, v[2].value, lp.upper()[j]);
          } else {
            lp.set_bounds(j, v[2].value, v[2].value);
          }
        } else if (v.size() == 3 && v[0].kind == Tok::number && v[2].kind == Tok::name) {
          const std::size_t j = var(v[2].text);
          if (v[1].text == "<=") {
            lp.set_bounds(j, v[0].value, lp.upper()[j]);
          } else if (v[1].text == ">=") {
            lp.set_bounds(j, lp.lower()[j], v[0].value);
          } else {
            lp.set_bounds(j, v[0].value, v[0].value);
          }
        } else {
          throw bad();
        }
      }
    }
  }
  if (!seen_objective) throw std::runtime_error("LP text: missing objective");
  return lp;
}

}  // namespace mcfnc
