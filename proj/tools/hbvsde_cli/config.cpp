#include "hbvsde_cli/config.hpp"

#include "hbvsde_cli/output.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace hbvsde::cli {

namespace {

std::string trim(std::string s)
{
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

double to_double(const std::string& v, const std::string& where)
{
    double out = 0.0;
    const auto* first = v.data();
    const auto* last = v.data() + v.size();
    if (!v.empty() && *first == '+')
        ++first;
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last)
        throw ConfigError(where + ": expected a number, got '" + v + "'");
    return out;
}

std::uint64_t to_uint(const std::string& v, const std::string& where)
{
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError(where + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

std::vector<double> to_list(const std::string& v, const std::string& where)
{
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!trim(item).empty())
            out.push_back(to_double(trim(item), where));
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, std::map<std::string, Setter>>& key_table()
{
    auto num = [](double RunConfig::* f) -> Setter {
        return [f](RunConfig& c, const std::string& v, const std::string& w) { c.*f = to_double(v, w); };
    };
    auto count = [](std::size_t RunConfig::* f) -> Setter {
        return [f](RunConfig& c, const std::string& v, const std::string& w) {
            c.*f = static_cast<std::size_t>(to_uint(v, w));
        };
    };
    auto model = [](double ModelParams::* f) -> Setter {
        return [f](RunConfig& c, const std::string& v, const std::string& w) { c.model.*f = to_double(v, w); };
    };
    auto noise = [](double NoiseParams::* f) -> Setter {
        return [f](RunConfig& c, const std::string& v, const std::string& w) { c.noise.*f = to_double(v, w); };
    };
    auto state = [](double StateVec::* f) -> Setter {
        return [f](RunConfig& c, const std::string& v, const std::string& w) { c.initial.*f = to_double(v, w); };
    };

    static const std::map<std::string, std::map<std::string, Setter>> table{
        {"model",
         {{"lambda", model(&ModelParams::lambda)},
          {"mu1", model(&ModelParams::mu1)},
          {"mu2", model(&ModelParams::mu2)},
          {"mu3", model(&ModelParams::mu3)},
          {"beta", model(&ModelParams::beta)},
          {"eta", model(&ModelParams::eta)},
          {"epsilon", model(&ModelParams::epsilon)},
          {"p", model(&ModelParams::p)},
          {"q", model(&ModelParams::q)}}},
        {"noise",
         {{"sigma1", noise(&NoiseParams::sigma1)},
          {"sigma2", noise(&NoiseParams::sigma2)},
          {"sigma3", noise(&NoiseParams::sigma3)}}},
        {"initial", {{"x", state(&StateVec::x)}, {"y", state(&StateVec::y)}, {"z", state(&StateVec::z)}}},
        {"grid", {{"t0", num(&RunConfig::t0)}, {"t_end", num(&RunConfig::t_end)}, {"dt", num(&RunConfig::dt)}}},
        {"run",
         {{"scheme", [](RunConfig& c, const std::string& v, const std::string&) { c.scheme = parse_scheme(v); }},
          {"paths", count(&RunConfig::paths)},
          {"seed", [](RunConfig& c, const std::string& v, const std::string& w) { c.seed = to_uint(v, w); }},
          {"policy", [](RunConfig& c, const std::string& v, const std::string&) { c.policy = parse_policy(v); }},
          {"stride", count(&RunConfig::stride)}}},
        {"analysis",
         {{"gamma",
           [](RunConfig& c, const std::string& v, const std::string& w) {
               if (v == "default") {
                   c.gamma.reset();
                   c.gamma_from_trajectory = false;
               } else if (v == "trajectory") {
                   c.gamma.reset();
                   c.gamma_from_trajectory = true;
               } else {
                   c.gamma = to_double(v, w);
                   c.gamma_from_trajectory = false;
               }
           }},
          {"samples", count(&RunConfig::samples)},
          {"horizons", [](RunConfig& c, const std::string& v, const std::string& w) { c.horizons = to_list(v, w); }},
          {"delta", num(&RunConfig::delta)},
          {"tail_fraction", num(&RunConfig::tail_fraction)},
          {"preset",
           [](RunConfig& c, const std::string& v, const std::string& w) {
               if (v != "gbm" && v != "hbv")
                   throw ConfigError(w + ": preset must be gbm or hbv");
               c.preset = v;
           }},
          {"gbm_a", num(&RunConfig::gbm_a)},
          {"gbm_b", num(&RunConfig::gbm_b)},
          {"gbm_x0", num(&RunConfig::gbm_x0)},
          {"conv_t", num(&RunConfig::conv_t)},
          {"base_steps", count(&RunConfig::base_steps)},
          {"levels", count(&RunConfig::levels)}}},
    };
    return table;
}

}  // namespace

Scheme parse_scheme(const std::string& s)
{
    if (s == "em")
        return Scheme::EulerMaruyama;
    if (s == "milstein")
        return Scheme::Milstein;
    throw ConfigError("scheme must be em or milstein, got '" + s + "'");
}

NegativityPolicy parse_policy(const std::string& s)
{
    if (s == "raw")
        return NegativityPolicy::Raw;
    if (s == "project")
        return NegativityPolicy::ProjectToZero;
    throw ConfigError("policy must be raw or project, got '" + s + "'");
}

SimGrid RunConfig::grid() const
{
    try {
        return SimGrid::from_step(t0, t_end, dt);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

RunConfig parse_ini(const std::string& text, RunConfig cfg)
{
    const auto& table = key_table();
    std::istringstream in(text);
    std::string line, section;
    std::set<std::string> seen;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const std::string where = "line " + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(where + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!table.contains(section))
                throw ConfigError(where + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ": expected key = value");
        if (section.empty())
            throw ConfigError(where + ": key outside of a section");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto& keys = table.at(section);
        const auto it = keys.find(key);
        if (it == keys.end())
            throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
        if (!seen.insert(section + "." + key).second)
            throw ConfigError(where + ": duplicate key '" + key + "' in [" + section + "]");
        it->second(cfg, value, where + " (" + section + "." + key + ")");
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    const std::string text = buf.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("manifest '" + path + "': " + e.what());
        }
        if (!j.contains("config_ini") || !j["config_ini"].is_string())
            throw ConfigError("manifest '" + path + "' has no config_ini entry");
        return parse_ini(j["config_ini"].get<std::string>());
    }
    return parse_ini(text);
}

std::string to_ini(const RunConfig& c)
{
    std::string s;
    auto kv = [&](const char* k, const std::string& v) { s += std::string(k) + " = " + v + "\n"; };
    auto num = [&](const char* k, double v) { kv(k, fmt17(v)); };
    auto cnt = [&](const char* k, std::uint64_t v) { kv(k, std::to_string(v)); };

    s += "[model]\n";
    num("lambda", c.model.lambda);
    num("mu1", c.model.mu1);
    num("mu2", c.model.mu2);
    num("mu3", c.model.mu3);
    num("beta", c.model.beta);
    num("eta", c.model.eta);
    num("epsilon", c.model.epsilon);
    num("p", c.model.p);
    num("q", c.model.q);
    s += "\n[noise]\n";
    num("sigma1", c.noise.sigma1);
    num("sigma2", c.noise.sigma2);
    num("sigma3", c.noise.sigma3);
    s += "\n[initial]\n";
    num("x", c.initial.x);
    num("y", c.initial.y);
    num("z", c.initial.z);
    s += "\n[grid]\n";
    num("t0", c.t0);
    num("t_end", c.t_end);
    num("dt", c.dt);
    s += "\n[run]\n";
    kv("scheme", to_string(c.scheme));
    cnt("paths", c.paths);
    cnt("seed", c.seed);
    kv("policy", to_string(c.policy));
    cnt("stride", c.stride);
    s += "\n[analysis]\n";
    kv("gamma", c.gamma ? fmt17(*c.gamma) : (c.gamma_from_trajectory ? "trajectory" : "default"));
    cnt("samples", c.samples);
    std::string hs;
    for (std::size_t i = 0; i < c.horizons.size(); ++i)
        hs += (i ? ", " : "") + fmt17(c.horizons[i]);
    kv("horizons", hs);
    num("delta", c.delta);
    num("tail_fraction", c.tail_fraction);
    kv("preset", c.preset);
    num("gbm_a", c.gbm_a);
    num("gbm_b", c.gbm_b);
    num("gbm_x0", c.gbm_x0);
    num("conv_t", c.conv_t);
    cnt("base_steps", c.base_steps);
    cnt("levels", c.levels);
    return s;
}

}  // namespace hbvsde::cli
