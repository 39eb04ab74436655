#include "ibrid/hwmodel.hpp"

#include "ibrid/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace ibrid {

using ordered_json = nlohmann::ordered_json;

void LinearBlock::validate() const {
    if (numerators.empty()) throw ContractError("LinearBlock: at least one input required");
    const std::size_t nb = numerators.front().size();
    if (nb < 1) throw ContractError("LinearBlock: numerator order must be >= 1");
    for (const auto& num : numerators)
        if (num.size() != nb) throw ContractError("LinearBlock: numerator orders must match");
    if (delay < 0) throw ContractError("LinearBlock: delay must be >= 0");
    if (!(sample_time > 0.0)) throw ContractError("LinearBlock: sample_time must be > 0");
}

std::size_t HWModelMiso::parameter_count() const {
    std::size_t n = linear.parameter_count();
    for (const auto& nl : input_nonlinearities) n += nl.parameter_count();
    n += output_nonlinearity.parameter_count();
    return n;
}

std::vector<double> HWModelMiso::pack() const {
    std::vector<double> theta(parameter_count());
    std::size_t j = 0;
    for (const auto& nl : input_nonlinearities) {
        nl.pack_parameters(std::span<double>(theta).subspan(j, nl.parameter_count()));
        j += nl.parameter_count();
    }
    for (const auto& num : linear.numerators)
        for (double b : num) theta[j++] = b;
    for (double f : linear.denominator) theta[j++] = f;
    output_nonlinearity.pack_parameters(
        std::span<double>(theta).subspan(j, output_nonlinearity.parameter_count()));
    return theta;
}

void HWModelMiso::unpack(std::span<const double> theta) {
    if (theta.size() != parameter_count()) throw ContractError("HWModelMiso: theta size mismatch");
    std::size_t j = 0;
    for (auto& nl : input_nonlinearities) {
        nl.set_parameters(theta.subspan(j, nl.parameter_count()));
        j += nl.parameter_count();
    }
    for (auto& num : linear.numerators)
        for (double& b : num) b = theta[j++];
    for (double& f : linear.denominator) f = theta[j++];
    output_nonlinearity.set_parameters(theta.subspan(j, output_nonlinearity.parameter_count()));
}

void HWModelMiso::validate() const {
    linear.validate();
    if (input_names.size() != linear.input_count() ||
        input_nonlinearities.size() != linear.input_count())
        throw ContractError("HWModelMiso: input name/nonlinearity/numerator counts must match");
    if (output_name.empty()) throw ContractError("HWModelMiso: output name required");
    if (!(output_scale != 0.0)) throw ContractError("HWModelMiso: output_scale must be nonzero");
}

const HWModelMiso& HWModelMimo::block_for(std::string_view output_name) const {
    for (const auto& b : blocks)
        if (b.output_name == output_name) return b;
    throw ContractError("HWModelMimo: no block for output '" + std::string(output_name) + "'");
}

void HWModelMimo::validate() const {
    if (blocks.empty()) throw ContractError("HWModelMimo: no blocks");
    for (const auto& b : blocks) b.validate();
    for (std::size_t i = 0; i < blocks.size(); ++i)
        for (std::size_t j = i + 1; j < blocks.size(); ++j)
            if (blocks[i].output_name == blocks[j].output_name)
                throw ContractError("HWModelMimo: duplicate output '" + blocks[i].output_name + "'");
}

MisoSimulator::MisoSimulator(const HWModelMiso& model) : model_(&model) {
    model.validate();
    reset();
}

void MisoSimulator::reset() {
    const std::size_t depth =
        static_cast<std::size_t>(model_->linear.delay) + model_->linear.numerator_order();
    w_hist_.assign(model_->linear.input_count(), std::vector<double>(depth, 0.0));
    x_hist_.assign(model_->linear.denominator_order(), 0.0);
}

double MisoSimulator::step(std::span<const double> inputs) {
    const auto& lin = model_->linear;
    if (inputs.size() != lin.input_count()) throw ContractError("MisoSimulator: input count mismatch");

    // shift input histories and insert f_i(u_i[k]) at position 0
    for (std::size_t i = 0; i < lin.input_count(); ++i) {
        auto& h = w_hist_[i];
        std::rotate(h.rbegin(), h.rbegin() + 1, h.rend());
        h[0] = model_->input_nonlinearities[i](inputs[i]);
    }

    double x = 0.0;
    const std::size_t nb = lin.numerator_order();
    const auto nk = static_cast<std::size_t>(lin.delay);
    for (std::size_t i = 0; i < lin.input_count(); ++i)
        for (std::size_t j = 0; j < nb; ++j) x += lin.numerators[i][j] * w_hist_[i][nk + j];
    for (std::size_t m = 0; m < lin.denominator_order(); ++m) x -= lin.denominator[m] * x_hist_[m];

    if (!x_hist_.empty()) {
        std::rotate(x_hist_.rbegin(), x_hist_.rbegin() + 1, x_hist_.rend());
        x_hist_[0] = x;
    }

    const double xn = (x - model_->output_offset) / model_->output_scale;
    return model_->output_nonlinearity(xn);
}

std::vector<double> simulate_miso(const HWModelMiso& model, const TimeSeries& inputs) {
    for (const auto& name : model.input_names)
        if (!inputs.has_channel(name))
            throw ContractError("simulate_miso: missing input channel '" + name + "'");

    std::vector<const std::vector<double>*> cols;
    cols.reserve(model.input_names.size());
    for (const auto& name : model.input_names) cols.push_back(&inputs.channel(name));

    MisoSimulator sim(model);
    const std::size_t n = inputs.length();
    std::vector<double> y(n);
    std::vector<double> u(cols.size());
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < cols.size(); ++i) u[i] = (*cols[i])[k];
        y[k] = sim.step(u);
    }
    return y;
}

TimeSeries simulate_mimo(const HWModelMimo& model, const TimeSeries& inputs) {
    model.validate();
    std::vector<TimeSeries::Channel> out;
    out.reserve(model.blocks.size());
    for (const auto& block : model.blocks)
        out.push_back({block.output_name, simulate_miso(block, inputs)});
    return TimeSeries(inputs.sample_time(), std::move(out));
}

// ---------------------------------------------------------------------------
// Artifact serialization
// ---------------------------------------------------------------------------

namespace {

ordered_json nl_to_json(const Nonlinearity& nl) {
    ordered_json j;
    j["family"] = to_string(nl.family());
    switch (nl.family()) {
        case NlFamily::identity:
            break;
        case NlFamily::piecewise_linear:
            j["breakpoints"] = nl.breakpoints();
            j["values"] = nl.values();
            break;
        case NlFamily::polynomial:
            j["coefficients"] = nl.coefficients();
            break;
        case NlFamily::sigmoid_network:
        case NlFamily::wavelet_network: {
            ordered_json units = ordered_json::array();
            for (const auto& u : nl.units())
                units.push_back({{"amplitude", u.amplitude},
                                 {"dilation", u.dilation},
                                 {"translation", u.translation}});
            j["units"] = std::move(units);
            j["offset"] = nl.offset();
            j["linear_slope"] = nl.linear_slope();
            break;
        }
    }
    return j;
}

Nonlinearity nl_from_json(const ordered_json& j) {
    const NlFamily family = nl_family_from_string(j.at("family").get<std::string>());
    switch (family) {
        case NlFamily::identity:
            return Nonlinearity::identity();
        case NlFamily::piecewise_linear:
            return Nonlinearity::piecewise_linear(j.at("breakpoints").get<std::vector<double>>(),
                                                  j.at("values").get<std::vector<double>>());
        case NlFamily::polynomial:
            return Nonlinearity::polynomial(j.at("coefficients").get<std::vector<double>>());
        case NlFamily::sigmoid_network:
        case NlFamily::wavelet_network: {
            std::vector<NlUnit> units;
            for (const auto& u : j.at("units"))
                units.push_back({u.at("amplitude").get<double>(), u.at("dilation").get<double>(),
                                 u.at("translation").get<double>()});
            const double offset = j.at("offset").get<double>();
            const double slope = j.at("linear_slope").get<double>();
            return family == NlFamily::sigmoid_network
                       ? Nonlinearity::sigmoid_network(std::move(units), offset, slope)
                       : Nonlinearity::wavelet_network(std::move(units), offset, slope);
        }
    }
    return Nonlinearity::identity();
}

ordered_json miso_to_json(const HWModelMiso& m) {
    ordered_json j;
    j["output"] = m.output_name;
    j["inputs"] = m.input_names;
    ordered_json nls = ordered_json::array();
    for (const auto& nl : m.input_nonlinearities) nls.push_back(nl_to_json(nl));
    j["input_nonlinearities"] = std::move(nls);
    j["linear"] = {{"numerators", m.linear.numerators},
                   {"denominator", m.linear.denominator},
                   {"delay", m.linear.delay},
                   {"sample_time", m.linear.sample_time}};
    j["normalization"] = {{"offset", m.output_offset}, {"scale", m.output_scale}};
    j["output_nonlinearity"] = nl_to_json(m.output_nonlinearity);
    return j;
}

HWModelMiso miso_from_json(const ordered_json& j) {
    HWModelMiso m;
    m.output_name = j.at("output").get<std::string>();
    m.input_names = j.at("inputs").get<std::vector<std::string>>();
    for (const auto& nl : j.at("input_nonlinearities")) m.input_nonlinearities.push_back(nl_from_json(nl));
    const auto& lin = j.at("linear");
    m.linear.numerators = lin.at("numerators").get<std::vector<std::vector<double>>>();
    m.linear.denominator = lin.at("denominator").get<std::vector<double>>();
    m.linear.delay = lin.at("delay").get<int>();
    m.linear.sample_time = lin.at("sample_time").get<double>();
    m.output_offset = j.at("normalization").at("offset").get<double>();
    m.output_scale = j.at("normalization").at("scale").get<double>();
    m.output_nonlinearity = nl_from_json(j.at("output_nonlinearity"));
    m.validate();
    return m;
}

} // namespace

void save_model(const HWModelMimo& model, const std::string& metadata_json,
                const std::filesystem::path& path) {
    model.validate();
    ordered_json j;
    j["format"] = "ibrid-model/1";
    j["frame"] = FrameConvention::name;
    ordered_json blocks = ordered_json::array();
    for (const auto& b : model.blocks) blocks.push_back(miso_to_json(b));
    j["blocks"] = std::move(blocks);
    j["metadata"] =
        metadata_json.empty() ? ordered_json::object() : ordered_json::parse(metadata_json);

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw ParseError("save_model: cannot open '" + tmp.string() + "'");
        f << j.dump(2) << '\n';
        if (!f) throw ParseError("save_model: write failed");
    }
    std::filesystem::rename(tmp, path);
}

LoadedModel load_model(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("load_model: cannot open '" + path.string() + "'");
    ordered_json j;
    try {
        j = ordered_json::parse(f);
    } catch (const std::exception& e) {
        throw ParseError(std::string("load_model: ") + e.what());
    }
    if (j.value("format", "") != "ibrid-model/1")
        throw ParseError("load_model: unsupported format tag");
    LoadedModel out;
    for (const auto& b : j.at("blocks")) out.model.blocks.push_back(miso_from_json(b));
    out.model.validate();
    out.metadata_json = j.value("metadata", ordered_json::object()).dump(2);
    return out;
}

} // namespace ibrid
