#include <cstdint>
#include <iostream>
#include <streambuf>

#include "CLI11.hpp"
#include "hjblab/cli.hpp"

namespace {

class null_buffer : public std::streambuf {
  protected:
    int overflow(int c) override { return c; }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-horizon HJB laboratory: solve / certify / verify / ladder / lemmas"};
    app.require_subcommand(1);

    hjb::CliOptions opt;
    auto seed_handler = [&opt](std::uint64_t v) {
        opt.seed = v;
        opt.has_seed = true;
        opt.lemma_seed = v;
    };
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "experiment config (INI)")->required();
        sub->add_option("--out", opt.out_dir, "output directory (overrides [output] dir)");
        sub->add_option_function<std::uint64_t>(
            "--seed", seed_handler, "seed override for [mc] and [certificates]");
        sub->add_flag("--quiet", opt.quiet, "suppress progress output");
    };

    add_common(app.add_subcommand("solve", "solve under control-truncation escalation"));
    CLI::App* certify = app.add_subcommand("certify", "audit a value-function CSV");
    add_common(certify);
    certify->add_option("--u", opt.u_csv, "value-function CSV to audit")->required();
    add_common(app.add_subcommand("verify",
                                  "solve, then check the stochastic and transform routes"));
    add_common(app.add_subcommand("ladder", "gradient-bound uniformity across grids/boxes"));
    CLI::App* lemmas = app.add_subcommand("lemmas", "matrix-inequality property suites");
    lemmas->add_option("--instances", opt.lemma_instances, "generated instances per suite");
    lemmas->add_option_function<std::uint64_t>("--seed", seed_handler, "generator seed");
    lemmas->add_flag("--quiet", opt.quiet, "suppress progress output");

    CLI11_PARSE(app, argc, argv);
    opt.command = app.get_subcommands().front()->get_name();

    null_buffer sink;
    std::ostream null_stream(&sink);
    return hjb::run_cli(opt, opt.quiet ? null_stream : std::cout, std::cerr);
}
