#ifndef MREST_CONFIG_HPP
#define MREST_CONFIG_HPP

#include <fstream>
#include <optional>
#include <string>

#include "json.hpp"

#include "mrest/error.hpp"
#include "mrest/estimators.hpp"
#include "mrest/glm.hpp"

namespace mrest {

// Model-family JSON:
//
//   {
//     "ps": [ {"link": "logit", "terms": [{"kind": "intercept"},
//                                          {"kind": "covpow", "j": 1, "k": 2}]} ],
//     "or": [ {"terms": [{"kind": "intercept"}, {"kind": "trtpow", "k": 1},
//                        {"kind": "covexp", "j": 1}]} ]
//   }
//
// Term kinds: intercept, covpow (j, k), covexp (j), trtpow (k). Covariate
// index j is 1-based (x1 is j = 1). A propensity entry may carry "trials";
// when absent it is bound to Q - 1 of the dataset.

inline nlohmann::json term_to_json(const FeatureTerm& t) {
  switch (t.kind) {
    case FeatureTerm::Kind::Intercept:
      return {{"kind", "intercept"}};
    case FeatureTerm::Kind::CovariatePower:
      return {{"kind", "covpow"}, {"j", t.covariate}, {"k", t.exponent}};
    case FeatureTerm::Kind::CovariateExp:
      return {{"kind", "covexp"}, {"j", t.covariate}};
    case FeatureTerm::Kind::TreatmentPower:
      return {{"kind", "trtpow"}, {"k", t.exponent}};
  }
  return {};
}

namespace detail {

inline int json_int(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError(where + ": missing \"" + key + "\"");
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ParseError(where + ": \"" + key + "\" must be an integer");
  return v.get<int>();
}

}  // namespace detail

inline FeatureTerm term_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw ParseError(where + ": term must be an object with a string \"kind\"");
  const auto kind = j.at("kind").get<std::string>();
  FeatureTerm t;
  if (kind == "intercept") {
    t = FeatureTerm::intercept();
  } else if (kind == "covpow") {
    t = FeatureTerm::covariate_power(detail::json_int(j, "j", where), detail::json_int(j, "k", where));
  } else if (kind == "covexp") {
    t = FeatureTerm::covariate_exp(detail::json_int(j, "j", where));
  } else if (kind == "trtpow") {
    t = FeatureTerm::treatment_power(detail::json_int(j, "k", where));
  } else {
    throw ParseError(where + ": unknown term kind '" + kind + "'");
  }
  if (t.kind != FeatureTerm::Kind::Intercept && t.kind != FeatureTerm::Kind::TreatmentPower &&
      t.covariate < 1)
    throw ParseError(where + ": covariate index must be >= 1");
  if (t.exponent < 1) throw ParseError(where + ": exponent must be >= 1");
  return t;
}

namespace detail {

inline FeatureList terms_from_json(const nlohmann::json& model, const std::string& where) {
  if (!model.is_object() || !model.contains("terms") || !model.at("terms").is_array())
    throw ParseError(where + ": model must be an object with a \"terms\" array");
  FeatureList out;
  const auto& terms = model.at("terms");
  for (std::size_t i = 0; i < terms.size(); ++i)
    out.push_back(term_from_json(terms[i], where + ".terms[" + std::to_string(i) + "]"));
  if (out.empty()) throw ParseError(where + ": empty term list");
  return out;
}

}  // namespace detail

inline nlohmann::json model_family_to_json(const ModelFamily& f) {
  nlohmann::json j;
  j["ps"] = nlohmann::json::array();
  j["or"] = nlohmann::json::array();
  for (const auto& p : f.ps) {
    nlohmann::json m{{"link", link_name(p.link)}, {"trials", p.trials}};
    m["terms"] = nlohmann::json::array();
    for (const auto& t : p.features) m["terms"].push_back(term_to_json(t));
    j["ps"].push_back(std::move(m));
  }
  for (const auto& o : f.outcome) {
    nlohmann::json m;
    m["terms"] = nlohmann::json::array();
    for (const auto& t : o.features) m["terms"].push_back(term_to_json(t));
    j["or"].push_back(std::move(m));
  }
  return j;
}

/// Parses a model family. `trials` fills propensity entries that omit it.
inline ModelFamily model_family_from_json(const nlohmann::json& j, std::optional<int> trials) {
  if (!j.is_object()) throw ParseError("model family: top level must be an object");
  for (const auto& [key, _] : j.items())
    if (key != "ps" && key != "or") throw ParseError("model family: unknown key '" + key + "'");
  ModelFamily f;
  if (j.contains("ps")) {
    if (!j.at("ps").is_array()) throw ParseError("model family: \"ps\" must be an array");
    for (std::size_t i = 0; i < j.at("ps").size(); ++i) {
      const auto& m = j.at("ps")[i];
      const std::string where = "ps[" + std::to_string(i) + "]";
      PropensityModelSpec spec;
      if (!m.is_object() || !m.contains("link") || !m.at("link").is_string())
        throw ParseError(where + ": missing string \"link\"");
      spec.link = parse_link(m.at("link").get<std::string>());
      spec.features = detail::terms_from_json(m, where);
      if (uses_treatment(spec.features))
        throw ParseError(where + ": treatment terms are not allowed in a propensity model");
      if (m.contains("trials")) {
        spec.trials = detail::json_int(m, "trials", where);
      } else if (trials) {
        spec.trials = *trials;
      } else {
        throw ParseError(where + ": \"trials\" is required when Q is unknown");
      }
      if (spec.trials < 1) throw ParseError(where + ": trials must be >= 1");
      f.ps.push_back(std::move(spec));
    }
  }
  if (j.contains("or")) {
    if (!j.at("or").is_array()) throw ParseError("model family: \"or\" must be an array");
    for (std::size_t i = 0; i < j.at("or").size(); ++i)
      f.outcome.push_back({detail::terms_from_json(j.at("or")[i], "or[" + std::to_string(i) + "]")});
  }
  if (f.ps.empty() && f.outcome.empty()) throw ParseError("model family: no models given");
  return f;
}

inline ModelFamily load_model_family(const std::string& path, std::optional<int> trials) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return model_family_from_json(j, trials);
}

}  // namespace mrest

#endif  // MREST_CONFIG_HPP
