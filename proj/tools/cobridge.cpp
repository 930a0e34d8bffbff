// cobridge: broker server, replayer, scenario runner, experiment sweeps and oracle.
//
// Exit codes: 0 ok, 1 usage or parse error, 2 environment (transport, I/O), 3 step timeout.

#include "cobridge/config.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace cobridge;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kEnvironment = 2;
constexpr int kTimeout = 3;

struct Overrides {
    std::string mode;
    std::string broker;
    std::optional<std::uint64_t> seed;
};

void apply(const Overrides& o, Scenario& sc) {
    if (o.mode == "virtual") {
        sc.clock_mode = ClockMode::Virtual;
    } else if (o.mode == "wallclock") {
        sc.clock_mode = ClockMode::Wallclock;
    }
    if (!o.broker.empty()) {
        sc.broker = parse_endpoint(o.broker);
        sc.transport = TransportKind::Tcp;
    }
    if (o.seed) sc.seed = *o.seed;
    sc.validate();
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("cobridge");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* lvl = std::getenv("COSIM_BRIDGE_LOG")) {
        spdlog::set_level(spdlog::level::from_str(lvl));
    }
}

void print_warnings(const Scenario& sc) {
    for (const auto& w : validate_config(sc)) std::cerr << "warning: " << w << '\n';
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw TransportError("cannot write '" + path + "'");
    return out;
}

int cmd_serve(const std::string& host, std::uint16_t port) {
    // Block the termination signals before any server thread exists, then wait for one.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    TcpBrokerServer server(Endpoint{host, port});
    server.start();
    std::cout << "listening on " << host << ':' << server.port() << std::endl;
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
    return kOk;
}

int cmd_replay(const std::string& file, const Overrides& o) {
    Scenario sc = load_scenario(file);
    if (o.mode == "virtual") {
        std::cerr << "error: replay runs on the wall clock only\n";
        return kUsage;
    }
    if (o.seed) sc.seed = *o.seed;
    const Endpoint ep = o.broker.empty() ? sc.broker : parse_endpoint(o.broker);
    if (ep.port == 0) {
        std::cerr << "error: replay needs a broker address (--broker host:port)\n";
        return kUsage;
    }
    const auto records = materialize(sc.replay, sc.seed);  // surfaces CSV errors before connecting
    TcpBroker broker(ep);
    Replayer r(records, sc.replay, sc.bridge.routing_key_in, broker);
    r.start();
    const std::size_t n = r.wait();
    broker.close();
    std::cout << "published " << n << " records to " << ep.to_string() << '\n';
    return kOk;
}

int cmd_run(const std::string& file, const std::string& out_path, const Overrides& o) {
    Scenario sc = load_scenario(file);
    apply(o, sc);
    print_warnings(sc);
    RunTrace trace;
    int code = kOk;
    try {
        trace = run(sc);
    } catch (const RunAborted& e) {
        if (!out_path.empty()) {
            auto out = open_out(out_path);
            write_trace_csv(out, e.partial());
        }
        throw;
    }
    if (!out_path.empty()) {
        auto out = open_out(out_path);
        write_trace_csv(out, trace);
    }
    write_summary(std::cout, trace);
    if (trace.timeout_step) {
        std::cerr << "error: " << trace.timeout_message << '\n';
        code = kTimeout;
    }
    return code;
}

int cmd_experiment(const std::string& file, const std::string& out_dir, const Overrides& o) {
    ExperimentGrid grid = load_grid(file);
    apply(o, grid.base);
    const auto cells = grid.cells();
    fs::create_directories(out_dir);

    auto summary = open_out((fs::path(out_dir) / "summary.csv").string());
    summary << "cell,trace";
    for (const auto& [name, values] : grid.axes) summary << ',' << name;
    summary << ",steps,mean_wall_us,max_wall_us,p99_wall_us,final_queue,last_out_seqno,timeout_step\n";

    int code = kOk;
    for (const auto& cell : cells) {
        std::ostringstream name;
        name << "cell_" << std::setw(3) << std::setfill('0') << cell.index << ".csv";
        std::cerr << "cell " << cell.index + 1 << '/' << cells.size() << '\n';
        const RunTrace trace = run(cell.scenario);
        auto out = open_out((fs::path(out_dir) / name.str()).string());
        write_trace_csv(out, trace);

        const TraceSummary s = trace.summary();
        summary << cell.index << ',' << name.str();
        for (const auto& [param, values] : grid.axes) summary << ',' << cell.params.at(param);
        summary << ',' << s.steps << std::fixed << std::setprecision(3) << ',' << s.mean_wall_us << ','
                << s.max_wall_us << ',' << s.p99_wall_us << ',' << s.final_queue << ',';
        if (s.last_out_seqno) summary << *s.last_out_seqno;
        summary << ',';
        if (trace.timeout_step) {
            summary << *trace.timeout_step;
            code = kTimeout;
        }
        summary << '\n';
    }
    std::cout << "wrote " << cells.size() << " traces to " << out_dir << '\n';
    return code;
}

int cmd_oracle(const std::string& file, const std::string& out_path, const Overrides& o) {
    Scenario sc = load_scenario(file);
    apply(o, sc);
    const auto outcome = oracle_for(sc);
    if (out_path.empty()) {
        write_oracle_csv(std::cout, outcome);
    } else {
        auto out = open_out(out_path);
        write_oracle_csv(out, outcome);
    }
    return outcome.timeout_step ? kTimeout : kOk;
}

int cmd_validate(const std::string& file) {
    const Scenario sc = load_scenario(file);
    const auto warnings = validate_config(sc);
    for (const auto& w : warnings) std::cout << "warning: " << w << '\n';
    if (warnings.empty()) std::cout << "ok\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Timestamped data bridge for fixed-step co-simulation"};
    app.require_subcommand(1);

    Overrides ov;
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub, bool with_mode) {
        if (with_mode) {
            sub->add_option("--mode", ov.mode, "Clock mode")->check(CLI::IsMember({"virtual", "wallclock"}));
        }
        sub->add_option("--seed", seed, "Seed for generated data");
    };

    std::string host = "127.0.0.1";
    std::uint16_t port = 5673;
    auto* serve = app.add_subcommand("serve", "Run the TCP broker until interrupted");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Bind port (0 picks a free one)");

    std::string file, out;
    auto* replay_cmd = app.add_subcommand("replay", "Publish a scenario's replay source to a broker");
    replay_cmd->add_option("scenario", file, "Scenario file")->required();
    replay_cmd->add_option("--broker", ov.broker, "Broker host:port");
    add_common(replay_cmd, true);

    auto* run_cmd = app.add_subcommand("run", "Run a scenario and write its step trace");
    run_cmd->add_option("scenario", file, "Scenario file")->required();
    run_cmd->add_option("--out", out, "Trace CSV path");
    run_cmd->add_option("--broker", ov.broker, "Use a TCP broker at host:port");
    add_common(run_cmd, true);

    auto* exp_cmd = app.add_subcommand("experiment", "Run every cell of a parameter grid");
    exp_cmd->add_option("grid", file, "Grid file")->required();
    exp_cmd->add_option("--out", out, "Output directory")->required();
    add_common(exp_cmd, true);

    auto* oracle_cmd = app.add_subcommand("oracle", "Print the reference per-step outputs of a scenario");
    oracle_cmd->add_option("scenario", file, "Scenario file")->required();
    oracle_cmd->add_option("--out", out, "CSV path (default stdout)");
    add_common(oracle_cmd, false);

    auto* validate_cmd = app.add_subcommand("validate", "Check a scenario against the configuration guidelines");
    validate_cmd->alias("validate_config");
    validate_cmd->add_option("scenario", file, "Scenario file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }
    for (auto* sub : {replay_cmd, run_cmd, exp_cmd, oracle_cmd}) {
        if (sub->parsed() && sub->count("--seed") > 0) ov.seed = seed;
    }

    try {
        if (serve->parsed()) return cmd_serve(host, port);
        if (replay_cmd->parsed()) return cmd_replay(file, ov);
        if (run_cmd->parsed()) return cmd_run(file, out, ov);
        if (exp_cmd->parsed()) return cmd_experiment(file, out, ov);
        if (oracle_cmd->parsed()) return cmd_oracle(file, out, ov);
        if (validate_cmd->parsed()) return cmd_validate(file);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const RunAborted& e) {
        std::cerr << "error: run aborted: " << e.what() << '\n';
        return kEnvironment;
    } catch (const TransportError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kEnvironment;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kEnvironment;
    }
    return kUsage;
}
