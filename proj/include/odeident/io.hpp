#pragma once

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "odeident/estimate.hpp"
#include "odeident/linearcase.hpp"
#include "odeident/numkernel.hpp"
#include "odeident/obsmap.hpp"

namespace odeident {

using json = nlohmann::json;

/// Shortest text that parses back to exactly `v`.
std::string format_double(double v);

/// CSV with header "t,x1,...,xk" and one row per sample.
void write_trajectory_csv(std::ostream& os, const std::vector<double>& times, const std::vector<Vec>& states);

/// Parses the trajectory CSV format; throws ParseError carrying the line number.
ObservationGrid read_trajectory_csv(std::istream& is);

/// CSV with header "t,alpha1..,x1..,zeta,flag".
void write_zeta_csv(std::ostream& os, const ZetaScan& scan);

json vec_to_json(const Vec& v);
Vec vec_from_json(const json& j);
json mat_to_json(const Mat& m);
Mat mat_from_json(const json& j);
json complex_to_json(const Complex& c);

void to_json(json& j, const InjectivityCertificate& c);
void from_json(const json& j, InjectivityCertificate& c);
void to_json(json& j, const LowerBoundReport& r);
void to_json(json& j, const DegeneracyReport& r);
void to_json(json& j, const BranchSet& b);
void to_json(json& j, const FullRankCheck& f);
void to_json(json& j, const EstimationResult& r);
void from_json(const json& j, EstimationResult& r);

}  // namespace odeident
