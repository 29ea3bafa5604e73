#include "oostrack/experiment.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace oostrack {

ExperimentConfig paper_config() {
    ExperimentConfig c;
    c.model.lambda = 0.12;
    c.model.mu = 0.02;
    c.model.q = 0.2;
    c.model.dim = 2;
    c.model.mean_appearance = (Vector(4) << 200.0, 200.0, 3.0, 0.0).finished();
    c.model.cov_appearance = Vector((Vector(4) << 2500.0, 2500.0, 1.0, 1.0).finished()).asDiagonal();
    c.sensor = position_sensor(2, 2.0, 0.9, 10.0, Vector::Zero(2), (Vector(2) << 800.0, 400.0).finished());
    c.filters = {FilterVariant::parse("tpmbm:none"), FilterVariant::parse("tpmbm:noos"), FilterVariant::parse("tpmbm:oos"),
                 FilterVariant::parse("tpmb:none"),  FilterVariant::parse("tpmb:noos"),  FilterVariant::parse("tpmb:oos")};
    c.windows = {5};
    return c;
}

void ExperimentConfig::validate() const {
    model.validate();
    sensor.validate(model.state_dim());
    metric.validate();
    if (n_scans < 1) throw InvalidArgument("scenario.n_scans must be >= 1");
    if (!(scan_rate > 0.0)) throw InvalidArgument("scenario.scan_rate must be > 0");
    if (oos_every < 1) throw InvalidArgument("scenario.oos_every must be >= 1");
    if (!(oos_delay_rate >= 0.0)) throw InvalidArgument("scenario.oos_delay_rate must be >= 0");
    if (filters.empty()) throw InvalidArgument("filter.variants must name at least one filter");
    if (windows.empty()) throw InvalidArgument("filter.L must list at least one window");
    for (int L : windows)
        if (L < 1) throw InvalidArgument("filter.L entries must be >= 1");
    if (tracker.prune.max_globals < 1) throw InvalidArgument("filter.max_globals must be >= 1");
    if (runs < 1) throw InvalidArgument("run.runs must be >= 1");
    if (threads < 1) throw InvalidArgument("run.threads must be >= 1");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> tokens(const std::string& value) {
    std::string v = value;
    for (char& ch : v)
        if (ch == ',') ch = ' ';
    std::istringstream is(v);
    std::vector<std::string> out;
    for (std::string t; is >> t;) out.push_back(t);
    return out;
}

double to_double(const std::string& t) {
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
    if (ec != std::errc() || ptr != t.data() + t.size()) throw InvalidArgument("expected a number, got '" + t + "'");
    return x;
}

long long to_int(const std::string& t) {
    long long x = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
    if (ec != std::errc() || ptr != t.data() + t.size()) throw InvalidArgument("expected an integer, got '" + t + "'");
    return x;
}

double scalar(const std::string& value) {
    const auto t = tokens(value);
    if (t.size() != 1) throw InvalidArgument("expected a single number");
    return to_double(t[0]);
}

long long integer(const std::string& value) {
    const auto t = tokens(value);
    if (t.size() != 1) throw InvalidArgument("expected a single integer");
    return to_int(t[0]);
}

std::vector<double> numbers(const std::string& value) {
    std::vector<double> out;
    for (const auto& t : tokens(value)) out.push_back(to_double(t));
    if (out.empty()) throw InvalidArgument("expected at least one number");
    return out;
}

Vector vec(const std::string& value) {
    const auto xs = numbers(value);
    return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

/// n values give a diagonal matrix, n*n values a full row-major matrix.
Matrix square(const std::vector<double>& xs, Eigen::Index n, const std::string& key) {
    const auto size = static_cast<Eigen::Index>(xs.size());
    if (size == n) return Vector(Eigen::Map<const Vector>(xs.data(), n)).asDiagonal();
    if (size == n * n) {
        Matrix m(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) m(i, j) = xs[static_cast<std::size_t>(i * n + j)];
        return m;
    }
    throw InvalidArgument(key + " needs " + std::to_string(n) + " diagonal or " + std::to_string(n * n) + " full entries");
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
    ExperimentConfig c = paper_config();
    std::vector<double> cov_appearance, noise;
    bool has_cov = false, has_noise = false;

    using Setter = std::function<void(const std::string&)>;
    const std::map<std::string, Setter> setters = {
        {"model.lambda", [&](const std::string& v) { c.model.lambda = scalar(v); }},
        {"model.mu", [&](const std::string& v) { c.model.mu = scalar(v); }},
        {"model.q", [&](const std::string& v) { c.model.q = scalar(v); }},
        {"model.dim", [&](const std::string& v) { c.model.dim = static_cast<int>(integer(v)); }},
        {"model.mean_appearance", [&](const std::string& v) { c.model.mean_appearance = vec(v); }},
        {"model.cov_appearance", [&](const std::string& v) { cov_appearance = numbers(v); has_cov = true; }},
        {"sensor.pd", [&](const std::string& v) { c.sensor.p_detect = scalar(v); }},
        {"sensor.R", [&](const std::string& v) { noise = numbers(v); has_noise = true; }},
        {"sensor.clutter_rate", [&](const std::string& v) { c.sensor.clutter_rate = scalar(v); }},
        {"sensor.region_min", [&](const std::string& v) { c.sensor.region_min = vec(v); }},
        {"sensor.region_max", [&](const std::string& v) { c.sensor.region_max = vec(v); }},
        {"sensor.gate_quantile", [&](const std::string& v) { c.sensor.gate_quantile = scalar(v); }},
        {"scenario.n_scans", [&](const std::string& v) { c.n_scans = static_cast<int>(integer(v)); }},
        {"scenario.scan_rate", [&](const std::string& v) { c.scan_rate = scalar(v); }},
        {"scenario.oos_every", [&](const std::string& v) { c.oos_every = static_cast<int>(integer(v)); }},
        {"scenario.oos_delay_rate", [&](const std::string& v) { c.oos_delay_rate = scalar(v); }},
        {"filter.variants", [&](const std::string& v) {
             c.filters.clear();
             for (const auto& t : tokens(v)) c.filters.push_back(FilterVariant::parse(t));
         }},
        {"filter.L", [&](const std::string& v) {
             c.windows.clear();
             for (const auto& t : tokens(v)) c.windows.push_back(static_cast<int>(to_int(t)));
         }},
        {"filter.max_globals", [&](const std::string& v) { c.tracker.prune.max_globals = static_cast<int>(integer(v)); }},
        {"filter.hyp_threshold", [&](const std::string& v) { c.tracker.prune.hypothesis_threshold = scalar(v); }},
        {"filter.ppp_threshold", [&](const std::string& v) { c.tracker.prune.ppp_threshold = scalar(v); }},
        {"filter.alive_threshold", [&](const std::string& v) { c.tracker.prune.alive_threshold = scalar(v); }},
        {"filter.existence_threshold", [&](const std::string& v) { c.tracker.prune.existence_threshold = scalar(v); }},
        {"filter.tpmbm_threshold", [&](const std::string& v) { c.tracker.tpmbm_threshold = scalar(v); }},
        {"filter.tpmb_threshold", [&](const std::string& v) { c.tracker.tpmb_threshold = scalar(v); }},
        {"metric.p", [&](const std::string& v) { c.metric.p = scalar(v); }},
        {"metric.c", [&](const std::string& v) { c.metric.c = scalar(v); }},
        {"metric.gamma", [&](const std::string& v) { c.metric.gamma = scalar(v); }},
        {"run.runs", [&](const std::string& v) { c.runs = static_cast<int>(integer(v)); }},
        {"run.seed", [&](const std::string& v) {
             const long long s = integer(v);
             if (s < 0) throw InvalidArgument("seed must be non-negative");
             c.seed = static_cast<std::uint64_t>(s);
         }},
        {"run.threads", [&](const std::string& v) { c.threads = static_cast<int>(integer(v)); }},
    };

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto where = source + ":" + std::to_string(line_no) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidArgument(where + "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) throw InvalidArgument(where + "unknown key '" + key + "'");
        try {
            it->second(value);
        } catch (const InvalidArgument& e) {
            throw InvalidArgument(where + key + ": " + e.what());
        }
    }

    const int d = c.model.dim;
    try {
        if (has_cov) c.model.cov_appearance = square(cov_appearance, 2 * d, "model.cov_appearance");
        if (has_noise) c.sensor.R = square(noise, d, "sensor.R");
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(source + ": " + e.what());
    }
    c.sensor.H = Matrix::Zero(d, 2 * d);
    c.sensor.H.leftCols(d).setIdentity();
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(source + ": " + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file " + path.string());
    return parse_config(in, path.string());
}

}  // namespace oostrack
