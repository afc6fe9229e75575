#pragma once

#include <string>

#include <json.hpp>

#include "ncmart/algebra.hpp"
#include "ncmart/fractional.hpp"
#include "ncmart/martingale.hpp"
#include "ncmart/spectral.hpp"

namespace ncmart {

using Json = nlohmann::json;

// {"dim": d, "re": [...], "im": [...]}, row-major
Json operator_to_json(const Operator& x);
Operator operator_from_json(const Json& j);

// {"kind": "tensor", "dims": [2,2,2]}, {"kind": "abelian_dyadic", "levels": 8},
// {"kind": "custom", "weights": [...], "levels": [[op, ...], ...]};
// optional "origin": "zero" | "scalars".
FiltrationSpec tower_spec_from_json(const Json& j);
Json tower_spec_to_json(const FiltrationSpec& spec);
// "tensor:2,2,2" or "abelian:4"
FiltrationSpec tower_spec_from_string(const std::string& s);
Origin origin_from_string(const std::string& s);

Json to_json(const SingularValueFunction& s);  // [[value, cum_weight], ...]
Json to_json(const CoefficientSequence& c);
Json to_json(const ZetaCertificate& c);
Json to_json(const AtomCertificate& c);

}  // namespace ncmart
