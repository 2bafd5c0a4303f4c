#include <pseudogen/commands.hpp>

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Spatial transfer operators, pseudo-generators and reconstructions for Langevin dynamics"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 1;
    int threads = 1;
    for (const auto& [name, cmd] : pseudogen::commands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 1024));
    }
    CLI11_PARSE(app, argc, argv);

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        const auto config = pseudogen::Config::load(config_path);
        const auto manifest = pseudogen::run_command(command, config, {out_dir, seed, threads});
        for (const auto& [key, value] : manifest.results) {
            std::cout << key << " = " << value << '\n';
        }
        for (const auto& w : manifest.warnings) {
            std::cerr << "warning: " << w << '\n';
        }
        std::cout << "wrote " << manifest.outputs.size() << " files and manifest.txt to " << out_dir << '\n';
    } catch (const pseudogen::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
