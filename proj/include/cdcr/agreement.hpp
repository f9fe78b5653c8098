#pragma once

// Chance-corrected agreement over yes/no verdicts.

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdcr/corpus.hpp"
#include "cdcr/errors.hpp"

namespace cdcr {

namespace detail {

inline double kappa_from(double observed, double chance) {
  if (chance >= 1.0 - 1e-12) {
    if (observed >= 1.0 - 1e-12) return 1.0;
    throw Error(ErrorCode::undefined_statistic, "chance agreement is 1 but observed agreement is not");
  }
  return std::clamp((observed - chance) / (1.0 - chance), -1.0, 1.0);
}

}  // namespace detail

// Counts of (a, b) verdict combinations.
inline double cohen_kappa(std::size_t yes_yes, std::size_t yes_no, std::size_t no_yes, std::size_t no_no) {
  double n = static_cast<double>(yes_yes + yes_no + no_yes + no_no);
  if (n == 0) throw Error(ErrorCode::insufficient_data, "no common items between the two annotators");
  double po = (yes_yes + no_no) / n;
  double a_yes = (yes_yes + yes_no) / n;
  double b_yes = (yes_yes + no_yes) / n;
  double pe = a_yes * b_yes + (1 - a_yes) * (1 - b_yes);
  return detail::kappa_from(po, pe);
}

inline double cohen_kappa(std::span<const Verdict> a, std::span<const Verdict> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::validation, "verdict lists are not aligned");
  std::size_t yy = 0, yn = 0, ny = 0, nn = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    bool ya = a[i] == Verdict::yes, yb = b[i] == Verdict::yes;
    ++(ya ? (yb ? yy : yn) : (yb ? ny : nn));
  }
  return cohen_kappa(yy, yn, ny, nn);
}

// One row per item: {yes count, no count}. Every row must sum to the same
// number of raters, at least 2.
inline double fleiss_kappa(std::span<const std::array<std::size_t, 2>> items) {
  if (items.empty()) throw Error(ErrorCode::insufficient_data, "no items rated by all raters");
  std::size_t n = items.front()[0] + items.front()[1];
  if (n < 2) throw Error(ErrorCode::insufficient_data, "each item needs at least 2 raters");
  double agree = 0.0;
  double yes_total = 0.0;
  for (const auto& [yes, no] : items) {
    if (yes + no != n) throw Error(ErrorCode::validation, "items are rated by different numbers of raters");
    agree += static_cast<double>(yes * yes + no * no - n) / static_cast<double>(n * (n - 1));
    yes_total += static_cast<double>(yes);
  }
  double count = static_cast<double>(items.size());
  double p_bar = agree / count;
  double p_yes = yes_total / (count * n);
  double pe = p_yes * p_yes + (1 - p_yes) * (1 - p_yes);
  return detail::kappa_from(p_bar, pe);
}

inline std::string interpret_kappa(double value) {
  if (!(value >= -1.0 && value <= 1.0)) throw Error(ErrorCode::validation, "kappa must lie in [-1, 1]");
  if (value < 0.0) return "poor agreement";
  if (value <= 0.20) return "slight agreement";
  if (value <= 0.40) return "fair agreement";
  if (value <= 0.60) return "moderate agreement";
  if (value <= 0.80) return "substantial agreement";
  return "almost perfect agreement";
}

// Verdicts on one pair, keyed by annotator. `difficult` is true when any
// annotator flagged the pair.
struct RatedItem {
  std::map<AnnotatorId, Verdict> verdicts;
  bool difficult = false;
};

struct KappaValue {
  std::size_t items = 0;
  std::optional<double> kappa;
  std::string note;  // set when kappa is absent
};

struct PairwiseKappa {
  AnnotatorId a;
  AnnotatorId b;
  KappaValue value;
};

struct AgreementReport {
  std::vector<AnnotatorId> annotators;
  std::map<AnnotatorId, std::size_t> annotated;  // items each annotator rated
  std::vector<PairwiseKappa> pairwise;
  KappaValue fleiss;
  KappaValue difficult_fleiss;
};

namespace detail {

template <class F>
KappaValue guarded(std::size_t items, F&& compute) {
  KappaValue v{items, std::nullopt, {}};
  try {
    v.kappa = compute();
  } catch (const Error& e) {
    v.note = e.what();
  }
  return v;
}

inline nlohmann::json kappa_json(const KappaValue& v) {
  nlohmann::json j{{"items", v.items}};
  if (v.kappa) {
    j["kappa"] = *v.kappa;
    j["band"] = interpret_kappa(*v.kappa);
  } else {
    j["kappa"] = nullptr;
    j["note"] = v.note;
  }
  return j;
}

}  // namespace detail

inline AgreementReport agreement_report(const std::vector<RatedItem>& items, std::vector<AnnotatorId> annotators) {
  std::sort(annotators.begin(), annotators.end());
  annotators.erase(std::unique(annotators.begin(), annotators.end()), annotators.end());
  AgreementReport r;
  r.annotators = annotators;
  for (const auto& a : annotators) r.annotated[a] = 0;
  for (const auto& item : items) {
    for (const auto& [a, v] : item.verdicts) {
      if (r.annotated.count(a)) ++r.annotated[a];
    }
  }

  for (std::size_t i = 0; i < annotators.size(); ++i) {
    for (std::size_t j = i + 1; j < annotators.size(); ++j) {
      std::vector<Verdict> va, vb;
      for (const auto& item : items) {
        auto x = item.verdicts.find(annotators[i]);
        auto y = item.verdicts.find(annotators[j]);
        if (x == item.verdicts.end() || y == item.verdicts.end()) continue;
        va.push_back(x->second);
        vb.push_back(y->second);
      }
      r.pairwise.push_back({annotators[i], annotators[j],
                            detail::guarded(va.size(), [&] { return cohen_kappa(va, vb); })});
    }
  }

  std::vector<std::array<std::size_t, 2>> all, difficult;
  for (const auto& item : items) {
    std::array<std::size_t, 2> counts{0, 0};
    bool complete = !annotators.empty();
    for (const auto& a : annotators) {
      auto it = item.verdicts.find(a);
      if (it == item.verdicts.end()) {
        complete = false;
        break;
      }
      ++counts[it->second == Verdict::yes ? 0 : 1];
    }
    if (!complete) continue;
    all.push_back(counts);
    if (item.difficult) difficult.push_back(counts);
  }
  r.fleiss = detail::guarded(all.size(), [&] { return fleiss_kappa(all); });
  r.difficult_fleiss = detail::guarded(difficult.size(), [&] { return fleiss_kappa(difficult); });
  return r;
}

inline nlohmann::json to_json(const AgreementReport& r) {
  nlohmann::json pairwise = nlohmann::json::array();
  for (const auto& p : r.pairwise) {
    auto j = detail::kappa_json(p.value);
    j["a"] = p.a;
    j["b"] = p.b;
    pairwise.push_back(std::move(j));
  }
  return {{"annotators", r.annotators},
          {"annotated", r.annotated},
          {"pairwise", pairwise},
          {"fleiss", detail::kappa_json(r.fleiss)},
          {"difficult_fleiss", detail::kappa_json(r.difficult_fleiss)}};
}

inline std::string format_table(const AgreementReport& r) {
  auto cell = [](const KappaValue& v) {
    if (!v.kappa) return std::string("n/a (") + v.note + ")";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f  %s", *v.kappa, interpret_kappa(*v.kappa).c_str());
    return std::string(buf);
  };
  std::string out = "annotator\tannotated\n";
  for (const auto& [a, n] : r.annotated) out += a + "\t" + std::to_string(n) + "\n";
  out += "\npair\titems\tcohen kappa\n";
  for (const auto& p : r.pairwise) {
    out += p.a + "-" + p.b + "\t" + std::to_string(p.value.items) + "\t" + cell(p.value) + "\n";
  }
  out += "\nfleiss (all)\t" + std::to_string(r.fleiss.items) + "\t" + cell(r.fleiss) + "\n";
  out += "fleiss (difficult)\t" + std::to_string(r.difficult_fleiss.items) + "\t" + cell(r.difficult_fleiss) + "\n";
  return out;
}

}  // namespace cdcr
