#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "decum/csv.hpp"
#include "decum/error.hpp"

namespace decum::mortality {

enum class Gender { Male, Female };

inline Gender parse_gender(const std::string& s) {
  if (s == "male" || s == "m" || s == "M" || s == "Male") return Gender::Male;
  if (s == "female" || s == "f" || s == "F" || s == "Female") return Gender::Female;
  throw ConfigError("unknown gender '" + s + "' (expected male or female)");
}

inline const char* to_string(Gender g) { return g == Gender::Male ? "male" : "female"; }

// Period life table with annual geometric improvement rates (negative = improving).
struct LifeTable {
  int min_age = 0;
  std::vector<double> male_qx, female_qx;
  std::vector<double> male_improvement, female_improvement;
  // Years between the table's central year and the projection start.
  double base_lag = 3.0;

  int max_age() const { return min_age + static_cast<int>(male_qx.size()) - 1; }
  bool covers(int age) const { return age >= min_age && age <= max_age(); }

  const std::vector<double>& qx(Gender g) const { return g == Gender::Male ? male_qx : female_qx; }
  const std::vector<double>& improvement(Gender g) const {
    return g == Gender::Male ? male_improvement : female_improvement;
  }

  void validate() const {
    const auto n = male_qx.size();
    if (n == 0 || female_qx.size() != n || male_improvement.size() != n || female_improvement.size() != n)
      throw DataError("life table: inconsistent column lengths");
    for (Gender g : {Gender::Male, Gender::Female}) {
      for (std::size_t i = 0; i < n; ++i) {
        const double q = qx(g)[i];
        const double imp = improvement(g)[i];
        if (!(q >= 0 && q <= 1)) throw DataError("life table: q outside [0,1] at age " + std::to_string(min_age + i));
        if (!(imp <= 0 && imp > -1))
          throw DataError("life table: improvement factor outside (-1, 0] at age " + std::to_string(min_age + i));
      }
      if (qx(g).back() != 1.0) throw DataError("life table: terminal age must have q = 1");
    }
    if (!(base_lag >= 0)) throw ConfigError("life table: base lag must be non-negative");
  }
};

inline LifeTable read_life_table(std::istream& in, const std::string& name = "life table") {
  const auto t = csv::Table::read(in, name);
  const auto ca = t.column("age"), cm = t.column("male_qx"), cf = t.column("female_qx"),
             cim = t.column("male_improvement"), cif = t.column("female_improvement");
  LifeTable table;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const int age = static_cast<int>(t.number(r, ca));
    if (r == 0) {
      table.min_age = age;
    } else if (age != table.min_age + static_cast<int>(r)) {
      throw DataError(name + ":" + std::to_string(t.line_number(r)) + ": ages must be consecutive");
    }
    table.male_qx.push_back(t.number(r, cm));
    table.female_qx.push_back(t.number(r, cf));
    table.male_improvement.push_back(t.number(r, cim));
    table.female_improvement.push_back(t.number(r, cif));
  }
  table.validate();
  return table;
}

inline LifeTable read_life_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_life_table(in, path);
}

// q_base * (1 + i)^(base_lag + offset), clamped to [0, 1].
inline double projected_qx(const LifeTable& table, Gender g, int age, double calendar_offset) {
  if (!table.covers(age))
    throw RangeError("age " + std::to_string(age) + " outside life table [" + std::to_string(table.min_age) +
                     ", " + std::to_string(table.max_age()) + "]");
  if (calendar_offset < 0) throw RangeError("negative calendar offset");
  const auto i = static_cast<std::size_t>(age - table.min_age);
  const double q = table.qx(g)[i];
  if (q >= 1.0) return 1.0;
  const double projected = q * std::pow(1 + table.improvement(g)[i], table.base_lag + calendar_offset);
  return std::clamp(projected, 0.0, 1.0);
}

struct SurvivalCurve {
  int age = 0;
  Gender gender = Gender::Male;
  std::vector<double> tpx;  // survival to x + t, tpx[0] = 1
  std::vector<double> dq;   // death in (x+t-1, x+t], dq[0] = 0

  int horizon() const { return static_cast<int>(tpx.size()) - 1; }
};

inline SurvivalCurve survival_curve(const LifeTable& table, Gender g, int x, int horizon) {
  if (horizon < 0) throw RangeError("negative horizon");
  if (!table.covers(x) || x + horizon > table.max_age() + 1)
    throw RangeError("horizon overruns life table: age " + std::to_string(x) + " + " + std::to_string(horizon) +
                     " years beyond terminal age " + std::to_string(table.max_age()));
  SurvivalCurve c;
  c.age = x;
  c.gender = g;
  c.tpx.assign(horizon + 1, 0.0);
  c.dq.assign(horizon + 1, 0.0);
  c.tpx[0] = 1.0;
  for (int t = 1; t <= horizon; ++t) {
    const double q = projected_qx(table, g, x + t - 1, t - 1);
    c.dq[t] = c.tpx[t - 1] * q;
    c.tpx[t] = c.tpx[t - 1] - c.dq[t];
  }
  return c;
}

// Curtate expectation plus half a year, with cohort improvement.
inline double life_expectancy(const LifeTable& table, Gender g, int age) {
  const auto curve = survival_curve(table, g, age, table.max_age() + 1 - age);
  double sum = 0;
  for (int t = 1; t <= curve.horizon(); ++t) sum += curve.tpx[t];
  return age + sum + 0.5;
}

inline void write_curve_csv(std::ostream& out, const SurvivalCurve& c) {
  out << "t,age,tpx,dq\n";
  for (int t = 0; t <= c.horizon(); ++t)
    out << t << ',' << c.age + t << ',' << csv::fmt(c.tpx[t]) << ',' << csv::fmt(c.dq[t]) << '\n';
}

}  // namespace decum::mortality
