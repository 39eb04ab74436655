#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ibrid {

/// Uniformly sampled, named multichannel signal record. The currency of the
/// whole pipeline: plants emit it, estimators consume it, CSV files carry it.
///
/// Invariants enforced at construction: all channels share the sample count,
/// every sample is finite, channel names are unique and non-empty,
/// sample_time > 0.
class TimeSeries {
public:
    struct Channel {
        std::string name;
        std::vector<double> samples;
    };

    TimeSeries(double sample_time, std::vector<Channel> channels);

    double sample_time() const { return sample_time_; }
    std::size_t length() const { return length_; }
    std::size_t channel_count() const { return channels_.size(); }

    bool has_channel(std::string_view name) const;
    const std::vector<double>& channel(std::string_view name) const;
    const std::vector<double>& channel(std::size_t index) const { return channels_.at(index).samples; }
    const std::string& name(std::size_t index) const { return channels_.at(index).name; }
    const std::vector<Channel>& channels() const { return channels_; }

    /// New series restricted to the named channels, in the given order.
    TimeSeries select(const std::vector<std::string>& names) const;
    /// New series dropping the first `count` samples (time re-based to zero).
    TimeSeries drop_front(std::size_t count) const;
    /// New series with `extra` channels appended.
    TimeSeries with_channels(std::vector<Channel> extra) const;

private:
    double sample_time_;
    std::size_t length_;
    std::vector<Channel> channels_;
};

/// Amplitude-invariant Park transform, phase-a cosine aligned. The only
/// convention the toolkit uses; kept as a type so model artifacts can record it.
struct FrameConvention {
    static constexpr const char* name = "park-amplitude-invariant-cos";
    static constexpr double scale = 2.0 / 3.0;
};

/// Rotating-frame angle from a sampled frequency channel:
/// theta[0] = theta0, theta[k] = theta[k-1] + 2*pi*f[k]*dt. Not wrapped.
std::vector<double> angle_from_frequency(std::span<const double> f_hz, double sample_time,
                                         double theta0);

struct DqPair {
    std::vector<double> d, q;
};
struct AbcTriple {
    std::vector<double> a, b, c;
};

/// abc -> dq at the given per-sample angle (amplitude-invariant).
DqPair abc_to_dq(std::span<const double> a, std::span<const double> b, std::span<const double> c,
                 std::span<const double> theta);

/// Exact algebraic inverse of abc_to_dq for balanced signals.
AbcTriple dq_to_abc(std::span<const double> d, std::span<const double> q,
                    std::span<const double> theta);

/// Single-sample transforms used by streaming (closed-loop) code paths.
void abc_to_dq_sample(double a, double b, double c, double theta, double& d, double& q);
void dq_to_abc_sample(double d, double q, double theta, double& a, double& b, double& c);

/// CSV persistence. Format: header `t,<name1>,<name2>,...`, one row per
/// sample, time column reconstructed from sample_time on write. Values are
/// emitted with round-trip precision.
TimeSeries read_csv(const std::filesystem::path& path);
void write_csv(const TimeSeries& series, const std::filesystem::path& path);

} // namespace ibrid
