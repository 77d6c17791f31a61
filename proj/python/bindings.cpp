#include "svem/error.hpp"
#include "svem/lnp.hpp"
#include "svem/medoids.hpp"
#include "svem/optimize.hpp"
#include "svem/serialize.hpp"
#include "svem/svem.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>

namespace py = pybind11;
using namespace svem;

namespace {

using NumericColumns = std::map<std::string, std::vector<double>>;
using CategoricalColumns = std::map<std::string, std::vector<std::string>>;

// columns keep the order of `order`, which the Python side takes from the input dict
Dataset to_dataset(const std::vector<std::string>& order, const NumericColumns& numeric,
                   const CategoricalColumns& categorical) {
    Dataset d;
    for (const auto& name : order) {
        if (auto it = numeric.find(name); it != numeric.end()) {
            d.add_numeric(name, it->second);
        } else if (auto jt = categorical.find(name); jt != categorical.end()) {
            d.add_categorical(name, jt->second);
        } else {
            throw DataError("column '" + name + "' has no values");
        }
    }
    return d;
}

py::tuple from_dataset(const Dataset& d) {
    std::vector<std::string> order;
    NumericColumns numeric;
    CategoricalColumns categorical;
    for (const auto& c : d.columns()) {
        order.push_back(c.name);
        if (c.kind == ColumnKind::numeric) {
            numeric[c.name] = c.numbers;
        } else {
            categorical[c.name] = c.labels;
        }
    }
    return py::make_tuple(order, numeric, categorical);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Compiled core of the svem package";

    auto base = py::register_exception<Error>(m, "SvemError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());

    m.def("version", &package_version);

    m.def("frw_weights", [](const std::vector<double>& u) {
        const FrwPair p = frw_from_uniforms(u);
        return py::make_tuple(p.w_train, p.w_valid);
    });
    m.def("draw_frw", [](std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        const FrwPair p = draw_frw(n, rng);
        return py::make_tuple(p.w_train, p.w_valid);
    });
    m.def("kish_neff", [](const std::vector<double>& w) {
        const EffectiveSize s = kish_neff(w);
        return py::make_tuple(s.n_eff, s.n_eff_adm);
    });

    m.def("gen_lnp", [](std::size_t n_runs, std::uint64_t seed, double noise_scale) {
        return from_dataset(gen_lnp(LnpOptions{n_runs, seed, noise_scale}));
    });

    m.def("build_spec",
          [](const std::vector<std::string>& order, const NumericColumns& num, const CategoricalColumns& cat,
             const std::string& options) {
              const ExpansionSpec spec =
                  build_expansion_spec(to_dataset(order, num, cat), expansion_options_from_json(Json::parse(options)));
              return to_json(spec).dump();
          });

    m.def("expand", [](const std::string& spec_json, const std::vector<std::string>& order, const NumericColumns& num,
                       const CategoricalColumns& cat) {
        const ExpansionSpec spec = expansion_spec_from_json(Json::parse(spec_json));
        DesignMatrix X = expand_rows(spec, to_dataset(order, num, cat));
        return py::make_tuple(X.column_names, std::move(X.values));
    });

    m.def("fit", [](const std::string& spec_json, const std::vector<std::string>& order, const NumericColumns& num,
                    const CategoricalColumns& cat, const std::string& response, const std::string& options) {
        const ExpansionSpec spec = expansion_spec_from_json(Json::parse(spec_json));
        const SvemOptions o = svem_options_from_json(Json::parse(options));
        const Dataset d = to_dataset(order, num, cat);
        py::gil_scoped_release release;
        return to_json(fit_svem(spec, d, response, o)).dump(2);
    });

    m.def(
        "predict",
        [](const std::string& model_json, const std::vector<std::string>& order, const NumericColumns& num,
           const CategoricalColumns& cat, std::optional<double> level) {
            const SvemModel model = svem_model_from_json(Json::parse(model_json));
            SvemPrediction p = predict_svem(model, to_dataset(order, num, cat), level);
            return py::make_tuple(std::move(p.mean), std::move(p.lower), std::move(p.upper));
        },
        py::arg("model_json"), py::arg("order"), py::arg("numeric"), py::arg("categorical"),
        py::arg("level") = py::none());

    m.def("geometric_score", [](const std::vector<double>& d, const std::vector<double>& w, double epsilon) {
        return geometric_score(d, w, epsilon);
    }, py::arg("d"), py::arg("weights"), py::arg("epsilon") = 1e-6);

    m.def("pam", [](const Eigen::MatrixXd& distance, std::size_t k) {
        const PamResult r = pam(distance, k);
        return py::make_tuple(r.medoids, r.cost);
    });
}
