#include "ibrid/timeseries.hpp"

#include "ibrid/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

namespace ibrid {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kTwoThirdsPi = 2.0943951023931954923084289221863;
} // namespace

TimeSeries::TimeSeries(double sample_time, std::vector<Channel> channels)
    : sample_time_(sample_time), length_(0), channels_(std::move(channels)) {
    if (!(sample_time_ > 0.0) || !std::isfinite(sample_time_))
        throw ContractError("TimeSeries: sample_time must be positive and finite");
    if (channels_.empty()) throw ContractError("TimeSeries: at least one channel required");
    length_ = channels_.front().samples.size();
    std::unordered_set<std::string> seen;
    for (const auto& ch : channels_) {
        if (ch.name.empty()) throw ContractError("TimeSeries: empty channel name");
        if (!seen.insert(ch.name).second)
            throw ContractError("TimeSeries: duplicate channel name '" + ch.name + "'");
        if (ch.samples.size() != length_)
            throw ContractError("TimeSeries: channel '" + ch.name + "' has " +
                                std::to_string(ch.samples.size()) + " samples, expected " +
                                std::to_string(length_));
        for (double v : ch.samples)
            if (!std::isfinite(v))
                throw ContractError("TimeSeries: non-finite sample in channel '" + ch.name + "'");
    }
}

bool TimeSeries::has_channel(std::string_view name) const {
    return std::any_of(channels_.begin(), channels_.end(),
                       [&](const Channel& c) { return c.name == name; });
}

const std::vector<double>& TimeSeries::channel(std::string_view name) const {
    for (const auto& c : channels_)
        if (c.name == name) return c.samples;
    throw ContractError("TimeSeries: no channel named '" + std::string(name) + "'");
}

TimeSeries TimeSeries::select(const std::vector<std::string>& names) const {
    std::vector<Channel> out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back({n, channel(n)});
    return TimeSeries(sample_time_, std::move(out));
}

TimeSeries TimeSeries::drop_front(std::size_t count) const {
    if (count >= length_) throw ContractError("TimeSeries::drop_front: nothing left");
    std::vector<Channel> out;
    out.reserve(channels_.size());
    for (const auto& c : channels_)
        out.push_back({c.name, std::vector<double>(c.samples.begin() + static_cast<long>(count),
                                                   c.samples.end())});
    return TimeSeries(sample_time_, std::move(out));
}

TimeSeries TimeSeries::with_channels(std::vector<Channel> extra) const {
    std::vector<Channel> out = channels_;
    for (auto& c : extra) out.push_back(std::move(c));
    return TimeSeries(sample_time_, std::move(out));
}

std::vector<double> angle_from_frequency(std::span<const double> f_hz, double sample_time,
                                         double theta0) {
    if (!(sample_time > 0.0)) throw ContractError("angle_from_frequency: sample_time must be > 0");
    std::vector<double> theta(f_hz.size());
    double acc = theta0;
    for (std::size_t k = 0; k < f_hz.size(); ++k) {
        if (!std::isfinite(f_hz[k]))
            throw ContractError("angle_from_frequency: non-finite frequency at sample " +
                                std::to_string(k));
        if (k > 0) acc += kTwoPi * f_hz[k] * sample_time;
        theta[k] = acc;
    }
    return theta;
}

void abc_to_dq_sample(double a, double b, double c, double theta, double& d, double& q) {
    const double ca = std::cos(theta), cb = std::cos(theta - kTwoThirdsPi),
                 cc = std::cos(theta + kTwoThirdsPi);
    const double sa = std::sin(theta), sb = std::sin(theta - kTwoThirdsPi),
                 sc = std::sin(theta + kTwoThirdsPi);
    d = FrameConvention::scale * (a * ca + b * cb + c * cc);
    q = -FrameConvention::scale * (a * sa + b * sb + c * sc);
}

void dq_to_abc_sample(double d, double q, double theta, double& a, double& b, double& c) {
    a = d * std::cos(theta) - q * std::sin(theta);
    b = d * std::cos(theta - kTwoThirdsPi) - q * std::sin(theta - kTwoThirdsPi);
    c = d * std::cos(theta + kTwoThirdsPi) - q * std::sin(theta + kTwoThirdsPi);
}

DqPair abc_to_dq(std::span<const double> a, std::span<const double> b, std::span<const double> c,
                 std::span<const double> theta) {
    const std::size_t n = a.size();
    if (b.size() != n || c.size() != n || theta.size() != n)
        throw ContractError("abc_to_dq: channel length mismatch");
    DqPair out;
    out.d.resize(n);
    out.q.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        abc_to_dq_sample(a[k], b[k], c[k], theta[k], out.d[k], out.q[k]);
    return out;
}

AbcTriple dq_to_abc(std::span<const double> d, std::span<const double> q,
                    std::span<const double> theta) {
    const std::size_t n = d.size();
    if (q.size() != n || theta.size() != n) throw ContractError("dq_to_abc: channel length mismatch");
    AbcTriple out;
    out.a.resize(n);
    out.b.resize(n);
    out.c.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        dq_to_abc_sample(d[k], q[k], theta[k], out.a[k], out.b[k], out.c[k]);
    return out;
}

namespace {

void format_value(std::string& out, double v) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    out.append(buf, static_cast<std::size_t>(n));
}

double parse_cell(std::string_view cell, long line) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    // tolerate surrounding spaces / trailing CR
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw ParseError("csv: non-numeric cell '" + std::string(cell) + "'", line);
    return v;
}

} // namespace

void write_csv(const TimeSeries& series, const std::filesystem::path& path) {
    std::string out;
    out.reserve(series.length() * series.channel_count() * 10 + 64);
    out += "t";
    for (std::size_t c = 0; c < series.channel_count(); ++c) {
        out += ',';
        out += series.name(c);
    }
    out += '\n';
    for (std::size_t k = 0; k < series.length(); ++k) {
        format_value(out, static_cast<double>(k) * series.sample_time());
        for (std::size_t c = 0; c < series.channel_count(); ++c) {
            out += ',';
            format_value(out, series.channel(c)[k]);
        }
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ParseError("csv: cannot open '" + path.string() + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw ParseError("csv: write failed for '" + path.string() + "'");
}

TimeSeries read_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("csv: cannot open '" + path.string() + "'");

    std::string header;
    if (!std::getline(f, header)) throw ParseError("csv: empty file", 1);
    if (!header.empty() && header.back() == '\r') header.pop_back();

    std::vector<std::string> names;
    {
        std::size_t start = 0;
        while (start <= header.size()) {
            const std::size_t comma = header.find(',', start);
            const std::size_t end = comma == std::string::npos ? header.size() : comma;
            names.emplace_back(header.substr(start, end - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    if (names.size() < 2 || names.front() != "t")
        throw ParseError("csv: header must be 't,<name>,...'", 1);
    const std::size_t ncols = names.size();

    std::vector<double> times;
    std::vector<std::vector<double>> cols(ncols - 1);
    std::string row;
    long line = 1;
    while (std::getline(f, row)) {
        ++line;
        if (!row.empty() && row.back() == '\r') row.pop_back();
        if (row.empty()) continue;
        std::size_t start = 0, col = 0;
        while (true) {
            const std::size_t comma = row.find(',', start);
            const std::size_t end = comma == std::string::npos ? row.size() : comma;
            if (col >= ncols) throw ParseError("csv: too many cells", line);
            const double v = parse_cell(std::string_view(row).substr(start, end - start), line);
            if (col == 0)
                times.push_back(v);
            else
                cols[col - 1].push_back(v);
            ++col;
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (col != ncols)
            throw ParseError("csv: row has " + std::to_string(col) + " cells, expected " +
                                 std::to_string(ncols),
                             line);
    }
    if (times.size() < 2) throw ParseError("csv: need at least two rows");

    const double t0 = times.front();
    const double dt = (times.back() - t0) / static_cast<double>(times.size() - 1);
    if (!(dt > 0.0)) throw ParseError("csv: non-increasing time column");
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double expected = t0 + static_cast<double>(k) * dt;
        if (std::abs(times[k] - expected) > 1e-9 * dt)
            throw ParseError("csv: non-uniform time column", static_cast<long>(k) + 2);
    }

    std::vector<TimeSeries::Channel> channels;
    channels.reserve(ncols - 1);
    for (std::size_t c = 1; c < ncols; ++c) channels.push_back({names[c], std::move(cols[c - 1])});
    return TimeSeries(dt, std::move(channels));
}

} // namespace ibrid
