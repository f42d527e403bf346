#include "paste/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

namespace paste {

using nlohmann::json;

double Prf::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

Prf& Prf::operator+=(const Prf& o) {
  tp += o.tp;
  predicted += o.predicted;
  gold += o.gold;
  return *this;
}

json Prf::to_json() const {
  return {{"precision", precision()}, {"recall", recall()}, {"f1", f1()},
          {"tp", tp},                 {"predicted", predicted}, {"gold", gold}};
}

namespace {

void check_sizes(const TripletSets& pred, const TripletSets& gold) {
  if (pred.size() != gold.size()) {
    throw Error("prediction count " + std::to_string(pred.size()) + " != gold count " + std::to_string(gold.size()));
  }
}

template <typename K>
Prf count(const std::set<K>& pred, const std::set<K>& gold) {
  Prf r;
  r.predicted = static_cast<long>(pred.size());
  r.gold = static_cast<long>(gold.size());
  for (const auto& p : pred) r.tp += gold.count(p);
  return r;
}

Prf exact_sentence(const std::vector<OpinionTriplet>& pred, const std::vector<OpinionTriplet>& gold) {
  return count(std::set<OpinionTriplet>(pred.begin(), pred.end()), std::set<OpinionTriplet>(gold.begin(), gold.end()));
}

}  // namespace

Prf score_exact_match(const TripletSets& pred, const TripletSets& gold) {
  check_sizes(pred, gold);
  Prf total;
  for (std::size_t i = 0; i < pred.size(); ++i) total += exact_sentence(pred[i], gold[i]);
  return total;
}

ElementScores score_elements(const TripletSets& pred, const TripletSets& gold) {
  check_sizes(pred, gold);
  ElementScores out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    std::set<Span> pa, ga, po, go;
    std::set<std::pair<Span, Span>> gold_pairs;
    for (const auto& t : pred[i]) {
      pa.insert(t.aspect);
      po.insert(t.opinion);
    }
    for (const auto& t : gold[i]) {
      ga.insert(t.aspect);
      go.insert(t.opinion);
      gold_pairs.insert({t.aspect, t.opinion});
    }
    out.aspect += count(pa, ga);
    out.opinion += count(po, go);

    const std::set<OpinionTriplet> gold_set(gold[i].begin(), gold[i].end());
    for (const auto& t : std::set<OpinionTriplet>(pred[i].begin(), pred[i].end())) {
      if (gold_pairs.count({t.aspect, t.opinion}) == 0) continue;
      ++out.pair_matched;
      out.sentiment_correct += gold_set.count(t);
    }
  }
  return out;
}

std::map<std::string, Prf> split_scores(const TripletSets& pred, const TripletSets& gold,
                                        const std::vector<SentenceFlags>& flags) {
  check_sizes(pred, gold);
  if (flags.size() != gold.size()) throw Error("flag count does not match sentence count");
  std::map<std::string, Prf> out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Prf s = exact_sentence(pred[i], gold[i]);
    const SentenceFlags& f = flags[i];
    if (f.is_single) out["Single"] += s;
    if (f.is_multi) out["Multi"] += s;
    if (f.is_multipol) out["MultiPol"] += s;
    if (f.is_overlap) out["Overlap"] += s;
  }
  return out;
}

EvalReport evaluate(const TripletSets& pred, const TripletSets& gold, const std::vector<SentenceFlags>& flags) {
  return {score_exact_match(pred, gold), split_scores(pred, gold, flags), score_elements(pred, gold)};
}

json EvalReport::to_json() const {
  json j;
  j["overall"] = overall.to_json();
  j["splits"] = json::object();
  for (const auto& [name, prf] : splits) j["splits"][name] = prf.to_json();
  j["aspect"] = elements.aspect.to_json();
  j["opinion"] = elements.opinion.to_json();
  j["sentiment"] = {{"accuracy", elements.sentiment_accuracy()},
                    {"pair_matched", elements.pair_matched},
                    {"correct", elements.sentiment_correct}};
  return j;
}

namespace {

std::string fmt3(double v) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(3) << v;
  return o.str();
}

}  // namespace

std::string EvalReport::to_text() const {
  std::ostringstream o;
  o << std::left << std::setw(10) << "" << std::right << std::setw(8) << "P." << std::setw(8) << "R." << std::setw(8)
    << "F1" << '\n';
  o << std::left << std::setw(10) << "Triplet" << std::right << std::setw(8) << fmt3(overall.precision())
    << std::setw(8) << fmt3(overall.recall()) << std::setw(8) << fmt3(overall.f1()) << "\n\n";

  o << std::left << std::setw(10) << "Split F1";
  for (const auto& name : split_categories()) o << std::right << std::setw(10) << name;
  o << '\n' << std::left << std::setw(10) << "";
  for (const auto& name : split_categories()) {
    auto it = splits.find(name);
    o << std::right << std::setw(10) << (it == splits.end() ? std::string("-") : fmt3(it->second.f1()));
  }
  o << "\n\n";

  o << std::left << std::setw(10) << "Element" << std::right << std::setw(8) << "P." << std::setw(8) << "R."
    << std::setw(8) << "F1" << std::setw(8) << "Acc." << '\n';
  for (const auto& [name, prf] : {std::pair{"Aspect", elements.aspect}, std::pair{"Opinion", elements.opinion}}) {
    o << std::left << std::setw(10) << name << std::right << std::setw(8) << fmt3(prf.precision()) << std::setw(8)
      << fmt3(prf.recall()) << std::setw(8) << fmt3(prf.f1()) << std::setw(8) << "" << '\n';
  }
  o << std::left << std::setw(10) << "Sentiment" << std::right << std::setw(32)
    << fmt3(elements.sentiment_accuracy()) << '\n';
  return o.str();
}

namespace {

std::string check_prf(const json& j, const std::string& where) {
  for (const char* k : {"precision", "recall", "f1", "tp", "predicted", "gold"}) {
    if (!j.contains(k) || !j[k].is_number()) return where + ": missing numeric '" + k + "'";
  }
  const double p = j["precision"], r = j["recall"], f = j["f1"];
  for (double v : {p, r, f}) {
    if (!(v >= 0.0 && v <= 1.0)) return where + ": value outside [0, 1]";
  }
  const double expect = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  if (std::abs(expect - f) > 1e-9) return where + ": f1 inconsistent with precision/recall";
  return {};
}

}  // namespace

std::string validate_report_json(const json& report) {
  if (!report.is_object()) return "report is not an object";
  for (const char* k : {"overall", "aspect", "opinion"}) {
    if (!report.contains(k)) return std::string("missing '") + k + "'";
    if (auto e = check_prf(report[k], k); !e.empty()) return e;
  }
  if (!report.contains("splits") || !report["splits"].is_object()) return "missing 'splits'";
  for (const auto& [name, v] : report["splits"].items()) {
    if (std::find(split_categories().begin(), split_categories().end(), name) == split_categories().end()) {
      return "unknown split '" + name + "'";
    }
    if (auto e = check_prf(v, "splits." + name); !e.empty()) return e;
  }
  if (!report.contains("sentiment") || !report["sentiment"].contains("accuracy")) return "missing sentiment accuracy";
  const double acc = report["sentiment"]["accuracy"];
  if (!(acc >= 0.0 && acc <= 1.0)) return "sentiment accuracy outside [0, 1]";
  return {};
}

}  // namespace paste
