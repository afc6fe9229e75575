#include "ncmart/serialize.hpp"

#include <sstream>

namespace ncmart {

Json operator_to_json(const Operator& x) {
  Json re = Json::array(), im = Json::array();
  for (long i = 0; i < x.rows(); ++i)
    for (long j = 0; j < x.cols(); ++j) {
      re.push_back(x(i, j).real());
      im.push_back(x(i, j).imag());
    }
  return {{"dim", x.rows()}, {"re", re}, {"im", im}};
}

Operator operator_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("re"))
    throw InvalidInput("operator JSON needs \"dim\" and \"re\"");
  const long d = j.at("dim").get<long>();
  if (d <= 0) throw InvalidInput("operator dimension must be positive");
  const auto& re = j.at("re");
  if (!re.is_array() || static_cast<long>(re.size()) != d * d)
    throw InvalidInput("operator \"re\" must hold dim*dim numbers");
  const bool has_im = j.contains("im");
  if (has_im && (!j.at("im").is_array() || static_cast<long>(j.at("im").size()) != d * d))
    throw InvalidInput("operator \"im\" must hold dim*dim numbers");
  Operator x(d, d);
  for (long i = 0; i < d; ++i)
    for (long c = 0; c < d; ++c) {
      const long idx = i * d + c;
      x(i, c) = Complex(re.at(idx).get<double>(), has_im ? j.at("im").at(idx).get<double>() : 0.0);
    }
  return x;
}

Origin origin_from_string(const std::string& s) {
  if (s == "zero") return Origin::Zero;
  if (s == "scalars") return Origin::Scalars;
  throw InvalidInput("origin must be \"zero\" or \"scalars\", got \"" + s + "\"");
}

FiltrationSpec tower_spec_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("kind")) throw InvalidInput("tower spec needs \"kind\"");
  FiltrationSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "tensor") {
    if (!j.contains("dims")) throw InvalidInput("tensor tower needs \"dims\"");
    spec.kind = TensorMatrix{j.at("dims").get<std::vector<int>>()};
  } else if (kind == "abelian_dyadic" || kind == "abelian") {
    if (!j.contains("levels")) throw InvalidInput("abelian tower needs \"levels\"");
    spec.kind = AbelianDyadic{j.at("levels").get<int>()};
  } else if (kind == "custom") {
    CustomSubalgebraBases c;
    if (!j.contains("levels") || !j.at("levels").is_array())
      throw InvalidInput("custom tower needs \"levels\"");
    for (const auto& level : j.at("levels")) {
      std::vector<Operator> set;
      for (const auto& op : level) set.push_back(operator_from_json(op));
      c.spanning_sets.push_back(std::move(set));
    }
    if (j.contains("weights")) c.weights = j.at("weights").get<std::vector<double>>();
    spec.kind = std::move(c);
  } else {
    throw InvalidInput("unknown tower kind \"" + kind + "\"");
  }
  if (j.contains("origin")) spec.origin = origin_from_string(j.at("origin").get<std::string>());
  return spec;
}

Json tower_spec_to_json(const FiltrationSpec& spec) {
  Json j;
  if (const auto* tm = std::get_if<TensorMatrix>(&spec.kind)) {
    j = {{"kind", "tensor"}, {"dims", tm->factor_dims}};
  } else if (const auto* ab = std::get_if<AbelianDyadic>(&spec.kind)) {
    j = {{"kind", "abelian_dyadic"}, {"levels", ab->levels}};
  } else {
    const auto& c = std::get<CustomSubalgebraBases>(spec.kind);
    Json levels = Json::array();
    for (const auto& set : c.spanning_sets) {
      Json ops = Json::array();
      for (const auto& op : set) ops.push_back(operator_to_json(op));
      levels.push_back(ops);
    }
    j = {{"kind", "custom"}, {"levels", levels}};
    if (!c.weights.empty()) j["weights"] = c.weights;
  }
  if (spec.origin) j["origin"] = *spec.origin == Origin::Zero ? "zero" : "scalars";
  return j;
}

FiltrationSpec tower_spec_from_string(const std::string& s) {
  auto colon = s.find(':');
  if (colon == std::string::npos) throw InvalidInput("tower spec must look like tensor:2,2 or abelian:4");
  const std::string kind = s.substr(0, colon), rest = s.substr(colon + 1);
  std::vector<int> nums;
  std::stringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (...) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw InvalidInput("bad number \"" + item + "\" in tower spec");
    nums.push_back(v);
  }
  FiltrationSpec spec;
  if (kind == "tensor") {
    if (nums.empty()) throw InvalidInput("tensor tower needs factor dimensions");
    spec.kind = TensorMatrix{nums};
  } else if (kind == "abelian" || kind == "abelian_dyadic") {
    if (nums.size() != 1) throw InvalidInput("abelian tower takes one level count");
    spec.kind = AbelianDyadic{nums[0]};
  } else {
    throw InvalidInput("unknown tower kind \"" + kind + "\"");
  }
  return spec;
}

Json to_json(const SingularValueFunction& s) {
  Json j = Json::array();
  for (const auto& st : s.steps()) j.push_back({st.value, st.cum_weight});
  return j;
}

Json to_json(const ZetaCertificate& c) {
  return {{"level", c.level},
          {"ratio", c.ratio},
          {"zeta", c.zeta},
          {"best_start", c.best_start},
          {"start_ratios", c.start_ratios}};
}

Json to_json(const CoefficientSequence& c) {
  Json j = {{"values", c.values}, {"provenance", provenance_name(c.provenance)}};
  if (c.provenance == Provenance::Optimized) {
    j["restarts"] = c.restarts;
    j["tol"] = c.tol;
    Json certs = Json::array();
    for (const auto& cert : c.certificates) certs.push_back(to_json(cert));
    j["certificates"] = certs;
  }
  if (!c.warnings.empty()) j["warnings"] = c.warnings;
  return j;
}

Json to_json(const AtomCertificate& c) {
  return {{"level", c.level},
          {"p", c.p},
          {"side", c.side == AtomSide::Column ? "column" : "row"},
          {"mean_zero_residual", c.mean_zero_residual},
          {"support_residual", c.support_residual},
          {"l2_slack", c.l2_slack},
          {"degenerate", c.degenerate},
          {"valid", c.valid()}};
}

}  // namespace ncmart
