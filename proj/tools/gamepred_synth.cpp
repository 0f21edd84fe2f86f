// Generates a self-contained synthetic workspace (datasets, pair registry,
// chat templates, run config) for demos and end-to-end testing.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <string>

#include "gamepred/synth.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Synthetic workspace generator"};

    std::string out_dir;
    gamepred::synth::CorpusSpec spec;
    app.add_option("--out", out_dir, "Directory to create the workspace in")->required();
    app.add_option("--seed", spec.seed, "Corpus seed");
    app.add_option("--bargaining", spec.bargaining, "Bargaining decision points");
    app.add_option("--persuasion", spec.persuasion, "Persuasion decision points");
    app.add_option("--negotiation", spec.negotiation, "Negotiation decision points");
    app.add_option("--matrix-repeated", spec.matrix_repeated, "Repeated matrix decision points");
    app.add_option("--matrix-oneshot", spec.matrix_oneshot, "One-shot matrix decision points");
    app.add_option("--lottery", spec.lottery, "Lottery decision points");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        std::string config = gamepred::synth::write_workspace(spec, out_dir);
        fmt::print("{}\n", config);
        return 0;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
}
