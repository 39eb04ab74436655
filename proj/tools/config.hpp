#pragma once

#include "ibrid/estimation.hpp"
#include "ibrid/excitation.hpp"
#include "ibrid/plant.hpp"
#include "ibrid/search.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ibrid::cli {

/// APRBS bounds for one excitation channel of the scenario.
struct ChannelSpec {
    double min_value = 0.0;
    double max_value = 0.0;
    double min_hold = 0.4;
    double max_hold = 1.2;
    int levels = 7;
};

struct ExcitationConfig {
    double sample_time = 5e-3;
    double estimation_duration = 45.0;
    double validation_duration = 20.0;
    double settle_time = 1.5;
    std::map<std::string, ChannelSpec> channels; ///< name -> APRBS spec
};

struct NoiseConfig {
    double voltage = 3e-4;   ///< pu, on u_d/u_q
    double current = 1e-4;   ///< pu, on i_d/i_q
    double frequency = 1.5e-3; ///< Hz, on f
};

struct ClosedLoopConfig {
    double duration = 20.0;
    double step_hold = 2.0;       ///< seconds per staircase level
    double voltage_step = 0.05;   ///< +-5 % specified-voltage staircase
    double line_resistance = 0.05;
    double line_inductance = 0.25;
    double shunt_conductance = 0.2;
    double solver_step = 5e-5;
};

struct Paths {
    std::filesystem::path out_dir = "out";
    std::filesystem::path estimation_csv; ///< default <out_dir>/est.csv
    std::filesystem::path validation_csv; ///< default <out_dir>/val.csv
    std::filesystem::path model;          ///< default <out_dir>/model.json
    std::filesystem::path report_dir;     ///< default <out_dir>/report

    void resolve();
};

/// Everything one pipeline run needs; JSON config file sections override the
/// built-in defaults, CLI flags override the file.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string mode = "gfm"; ///< "gfm" | "gfl"
    int workers = 1;
    double frame_alignment = 0.78539816339744831; ///< initial voltage-phasor angle in the rec. frame
    GfmParams gfm;
    GflParams gfl;
    double solver_step = 5e-5;
    ExcitationConfig excitation;
    NoiseConfig noise;
    SearchSpace search;
    EstimationConfig estimation;
    CascadeConfig cascade;
    ClosedLoopConfig closedloop;
    std::map<std::string, std::vector<std::string>> model_inputs; ///< output -> MISO input names
    Paths paths;

    static RunConfig defaults_for_mode(const std::string& mode);
    void apply_file(const std::filesystem::path& config_path); ///< merge JSON overrides
    void validate() const;
};

} // namespace ibrid::cli
