#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "odeident/errors.hpp"
#include "odeident/estimate.hpp"
#include "odeident/linearcase.hpp"
#include "odeident/obsmap.hpp"
#include "odeident/ode.hpp"

namespace py = pybind11;
using namespace odeident;

namespace {

// Basis given as nested lists: basis[i][component] = [[coeff, e1, ..., ek], ...].
std::vector<PolyMap> to_basis(const std::vector<std::vector<std::vector<std::vector<double>>>>& nested, int k) {
    std::vector<PolyMap> out;
    for (const auto& fn : nested) {
        PolyMap map;
        for (const auto& comp : fn) {
            std::vector<Monomial> monos;
            for (const auto& mono : comp) {
                if (static_cast<int>(mono.size()) != k + 1) {
                    throw DimensionError("monomials are [coeff, e1, ..., ek] with k = " + std::to_string(k));
                }
                Monomial mn{mono[0], {}};
                for (int e = 1; e <= k; ++e) {
                    const double ex = mono[static_cast<std::size_t>(e)];
                    if (ex < 0 || ex != static_cast<int>(ex)) throw DomainError("exponents must be non-negative integers");
                    mn.exponents.push_back(static_cast<int>(ex));
                }
                monos.push_back(std::move(mn));
            }
            map.components.push_back(std::move(monos));
        }
        out.push_back(std::move(map));
    }
    return out;
}

ObservationGrid to_grid(const std::vector<double>& times, const Mat& values) {
    if (static_cast<Eigen::Index>(times.size()) != values.rows()) {
        throw DimensionError("times and values must have the same number of rows");
    }
    ObservationGrid g;
    g.times = times;
    for (Eigen::Index r = 0; r < values.rows(); ++r) g.values.push_back(values.row(r).transpose());
    if (times.size() >= 2) g.delta_t = times[1] - times[0];
    return g;
}

Mat stack_rows(const std::vector<Vec>& rows) {
    const Eigen::Index k = rows.empty() ? 0 : rows.front().size();
    Mat out(static_cast<Eigen::Index>(rows.size()), k);
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Identifiability analysis and parameter recovery for parametrized ODEs";
    m.attr("__version__") = "0.1.0";

    static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
    static py::exception<DimensionError> dimension(m, "DimensionError", error.ptr());
    static py::exception<DomainError> domain(m, "DomainError", error.ptr());
    static py::exception<PreconditionError> precondition(m, "PreconditionError", error.ptr());
    static py::exception<DefectiveMatrix> defective(m, "DefectiveMatrix", precondition.ptr());
    static py::exception<ConsistencyError> consistency(m, "ConsistencyError", error.ptr());
    static py::exception<IntegrationError> integration(m, "IntegrationError", error.ptr());
    static py::exception<NotIdentifiable> not_identifiable(m, "NotIdentifiable", error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        auto make = [](const py::handle& type, const std::exception& e) {
            return py::reinterpret_borrow<py::object>(type)(e.what());
        };
        try {
            if (p) std::rethrow_exception(p);
        } catch (const NotIdentifiable& e) {
            py::object inst = make(not_identifiable, e);
            inst.attr("beta") = e.beta();
            inst.attr("sigma_max") = e.sigma_max();
            inst.attr("rank") = e.rank();
            PyErr_SetObject(not_identifiable.ptr(), inst.ptr());
        } catch (const IntegrationError& e) {
            py::object inst = make(integration, e);
            inst.attr("failure_time") = e.failure_time();
            PyErr_SetObject(integration.ptr(), inst.ptr());
        } catch (const DefectiveMatrix& e) {
            PyErr_SetString(defective.ptr(), e.what());
        } catch (const PreconditionError& e) {
            PyErr_SetString(precondition.ptr(), e.what());
        } catch (const DimensionError& e) {
            PyErr_SetString(dimension.ptr(), e.what());
        } catch (const DomainError& e) {
            PyErr_SetString(domain.ptr(), e.what());
        } catch (const ConsistencyError& e) {
            PyErr_SetString(consistency.ptr(), e.what());
        } catch (const Error& e) {
            PyErr_SetString(error.ptr(), e.what());
        }
    });

    py::class_<ParamSystem>(m, "ParamSystem")
        .def_static("matrix_linear", &ParamSystem::matrix_linear, py::arg("k"), "x' = A x with a = vec(A) row-major")
        .def_static(
            "polynomial_basis",
            [](int k, const std::vector<std::vector<std::vector<std::vector<double>>>>& basis) {
                return ParamSystem::polynomial_basis(k, to_basis(basis, k));
            },
            py::arg("k"), py::arg("basis"),
            "x' = sum_i a_i P_i(x); basis[i][component] lists monomials [coeff, e1, ..., ek]")
        .def_static(
            "callback",
            [](int k, int n, ParamSystem::FieldFn f) { return ParamSystem::callback(k, n, std::move(f)); },
            py::arg("k"), py::arg("n"), py::arg("f"), "Black-box field f(x, a); derivatives by finite differences")
        .def_property_readonly("state_dim", &ParamSystem::state_dim)
        .def_property_readonly("param_dim", &ParamSystem::param_dim)
        .def_property_readonly("species", [](const ParamSystem& s) { return std::string(to_string(s.species())); })
        .def("field", &ParamSystem::field, py::arg("x"), py::arg("alpha"));

    py::class_<ObservationMap>(m, "ObservationMap")
        .def(py::init<ParamSystem, Vec, double, int, double>(), py::arg("system"), py::arg("x0"), py::arg("h"),
             py::arg("m"), py::arg("tol") = 1e-10)
        .def_property_readonly("x0", &ObservationMap::x0)
        .def_property_readonly("h", &ObservationMap::h)
        .def_property_readonly("samples", &ObservationMap::samples)
        .def_property_readonly("tol", &ObservationMap::tol)
        .def_property_readonly("param_dim", &ObservationMap::param_dim)
        .def_property_readonly("output_dim", &ObservationMap::output_dim);

    m.def(
        "integrate",
        [](const ParamSystem& sys, const Vec& alpha, const Vec& x0, double t_end, int samples, double tol) {
            const Trajectory tr = integrate(sys, alpha, x0, t_end, samples, tol);
            return py::make_tuple(tr.times, stack_rows(tr.states));
        },
        py::arg("system"), py::arg("alpha"), py::arg("x0"), py::arg("t_end"), py::arg("samples"),
        py::arg("tol") = 1e-10, "Returns (times, states) on samples + 1 equally spaced points including t = 0");

    m.def("phi", &phi, py::arg("map"), py::arg("alpha"));
    m.def("phi_jacobian", &phi_jacobian, py::arg("map"), py::arg("alpha"));

    py::class_<InjectivityCertificate>(m, "InjectivityCertificate")
        .def_readonly("alpha0", &InjectivityCertificate::alpha0)
        .def_readonly("beta", &InjectivityCertificate::beta)
        .def_readonly("gamma", &InjectivityCertificate::gamma)
        .def_readonly("gamma_raw", &InjectivityCertificate::gamma_raw)
        .def_readonly("r_work", &InjectivityCertificate::r_work)
        .def_readonly("r_cert", &InjectivityCertificate::r_cert)
        .def_readonly("lipschitz_lower", &InjectivityCertificate::lipschitz_lower)
        .def_readonly("sigma_max", &InjectivityCertificate::sigma_max)
        .def_readonly("jacobian_rank", &InjectivityCertificate::jacobian_rank)
        .def_readonly("seed", &InjectivityCertificate::seed);

    py::class_<LowerBoundReport>(m, "LowerBoundReport")
        .def_readonly("pairs_tested", &LowerBoundReport::pairs_tested)
        .def_readonly("violations", &LowerBoundReport::violations)
        .def_readonly("identical_pairs", &LowerBoundReport::identical_pairs)
        .def_readonly("worst_ratio", &LowerBoundReport::worst_ratio)
        .def_readonly("required_ratio", &LowerBoundReport::required_ratio);

    m.def(
        "certify_radius",
        [](const ObservationMap& map, const Vec& a0, double r_work, int samples, double safety, std::uint64_t seed) {
            return certify_radius(map, a0, r_work, samples, safety, seed);
        },
        py::arg("map"), py::arg("alpha0"), py::arg("r_work"), py::arg("gamma_samples") = 40, py::arg("safety") = 1.5,
        py::arg("seed") = 0);
    m.def(
        "verify_lower_bound",
        [](const ObservationMap& map, const InjectivityCertificate& c, long pairs, std::uint64_t seed) {
            return verify_lower_bound(map, c, pairs, seed);
        },
        py::arg("map"), py::arg("certificate"), py::arg("pairs") = 10000, py::arg("seed") = 0);

    py::class_<ZetaScan>(m, "ZetaScan")
        .def_readonly("flagged", &ZetaScan::flagged)
        .def_readonly("failed", &ZetaScan::failed)
        .def_readonly("flagged_fraction", &ZetaScan::flagged_fraction)
        .def_property_readonly("cells", [](const ZetaScan& s) {
            py::list out;
            for (const ZetaCell& c : s.cells) {
                py::dict d;
                d["t"] = c.t;
                d["alpha"] = c.alpha;
                d["x"] = c.x;
                d["zeta"] = c.zeta;
                d["flag"] = static_cast<int>(c.flag);
                out.append(d);
            }
            return out;
        });

    m.def(
        "zeta_scan",
        [](const ObservationMap& map, const std::vector<double>& t, const Vec& alo, const Vec& ahi, const Vec& xlo,
           const Vec& xhi, const std::vector<int>& grid, double rank_tol) {
            return zeta_scan(map, t, Box{alo, ahi}, Box{xlo, xhi}, grid, rank_tol);
        },
        py::arg("map"), py::arg("t_values"), py::arg("alpha_lo"), py::arg("alpha_hi"), py::arg("x_lo"),
        py::arg("x_hi"), py::arg("grid"), py::arg("rank_tol") = 1e-10);

    py::class_<DegeneracyReport>(m, "DegeneracyReport")
        .def_readonly("eigenvalues", &DegeneracyReport::eigenvalues)
        .def_readonly("defective", &DegeneracyReport::defective)
        .def_readonly("discriminant", &DegeneracyReport::discriminant)
        .def_readonly("discriminant_closed_form", &DegeneracyReport::discriminant_closed_form)
        .def_readonly("closed_form_sign", &DegeneracyReport::closed_form_sign)
        .def_readonly("double_eigenvalue", &DegeneracyReport::double_eigenvalue)
        .def_property_readonly("aliasing_pairs",
                               [](const DegeneracyReport& r) {
                                   std::vector<std::tuple<int, int, int>> out;
                                   for (const auto& p : r.aliasing_pairs) out.emplace_back(p.i, p.j, p.k);
                                   return out;
                               })
        .def_readonly("in_set_A", &DegeneracyReport::in_set_A)
        .def_readonly("krylov_rank", &DegeneracyReport::krylov_rank)
        .def_readonly("x0_in_E", &DegeneracyReport::x0_in_E);

    py::class_<BranchSet>(m, "BranchSet")
        .def_readonly("base", &BranchSet::base)
        .def_readonly("h", &BranchSet::h)
        .def_readonly("branches", &BranchSet::branches)
        .def_readonly("shifts", &BranchSet::shifts);

    py::class_<ExpDifferenceDeterminant>(m, "ExpDifferenceDeterminant")
        .def_readonly("numeric", &ExpDifferenceDeterminant::numeric)
        .def_readonly("closed_form", &ExpDifferenceDeterminant::closed_form)
        .def_readonly("printed_sign", &ExpDifferenceDeterminant::printed_sign);

    py::class_<FullRankCheck>(m, "FullRankCheck")
        .def_readonly("rank", &FullRankCheck::rank)
        .def_readonly("sigma_min", &FullRankCheck::sigma_min)
        .def_readonly("sigma_max", &FullRankCheck::sigma_max)
        .def_readonly("full", &FullRankCheck::full);

    m.def(
        "degeneracy_report", [](const Mat& a, const Vec& x0, double h) { return degeneracy_report(a, x0, h); },
        py::arg("alpha"), py::arg("x0"), py::arg("h"));
    m.def(
        "log_branches", [](const Mat& a, double h, int k_max) { return log_branches(a, h, k_max); },
        py::arg("alpha0"), py::arg("h"), py::arg("k_max"));
    m.def(
        "exp_difference_determinant",
        [](const std::vector<Complex>& l) { return exp_difference_determinant(l); }, py::arg("eigenvalues"));
    m.def("phi_exact", &phi_exact, py::arg("alpha"), py::arg("x0"), py::arg("h"), py::arg("m"));
    m.def("phi_exact_jacobian", &phi_exact_jacobian, py::arg("alpha"), py::arg("x0"), py::arg("h"), py::arg("m"));
    m.def(
        "full_rank_check",
        [](const Mat& a, const Vec& x0, double h, int mm, double tol) { return full_rank_check(a, x0, h, mm, tol); },
        py::arg("alpha0"), py::arg("x0"), py::arg("h"), py::arg("m"), py::arg("integrator_tol") = 1e-10);

    py::class_<EstimationResult>(m, "EstimationResult")
        .def_readonly("alpha_hat", &EstimationResult::alpha_hat)
        .def_readonly("residual", &EstimationResult::residual)
        .def_readonly("iterations", &EstimationResult::iterations)
        .def_readonly("converged", &EstimationResult::converged)
        .def_readonly("jacobian_rank", &EstimationResult::jacobian_rank)
        .def_readonly("condition", &EstimationResult::condition)
        .def_readonly("rank_deficient", &EstimationResult::rank_deficient)
        .def_readonly("step_norm", &EstimationResult::step_norm)
        .def_readonly("gradient_norm", &EstimationResult::gradient_norm)
        .def_property_readonly("history", [](const EstimationResult& r) {
            std::vector<std::pair<Vec, double>> out;
            for (const auto& s : r.history) out.emplace_back(s.alpha, s.residual);
            return out;
        });

    m.def(
        "fd_linear_estimate",
        [](const std::vector<double>& times, const Mat& values, const ParamSystem& sys, double ridge) {
            return fd_linear_estimate(to_grid(times, values), sys, FdOptions{ridge});
        },
        py::arg("times"), py::arg("values"), py::arg("system"), py::arg("ridge") = 0.0,
        "values has one row per sample time");
    m.def(
        "gauss_newton_invert",
        [](const ObservationMap& map, const Vec& y, const Vec& init, int max_iter, double step_tol, double grad_tol,
           double damping) {
            return gauss_newton_invert(map, y, init, GaussNewtonOptions{max_iter, step_tol, grad_tol, damping});
        },
        py::arg("map"), py::arg("y_obs"), py::arg("alpha_init"), py::arg("max_iter") = 100,
        py::arg("step_tol") = 1e-10, py::arg("grad_tol") = 1e-8, py::arg("damping") = 1e-3);
    m.def(
        "add_noise",
        [](const std::vector<double>& times, const Mat& values, double sigma, std::uint64_t seed) {
            return stack_rows(add_noise(to_grid(times, values), sigma, seed).values);
        },
        py::arg("times"), py::arg("values"), py::arg("sigma"), py::arg("seed"));
}
