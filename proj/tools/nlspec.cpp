#include <iostream>

#include <CLI11.hpp>

#include "nonlocal_spectra/app.hpp"

namespace {

int report(const nls::app::RunResult& r) {
  (r.exit_code == 0 ? std::cout : std::cerr) << r.message << "\n";
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nlspec: principal eigenvalues and maximum principles for nonlocal elliptic operators"};
  app.set_version_flag("--version", NONLOCAL_SPECTRA_VERSION);
  app.require_subcommand(0, 1);

  nls::app::RunOptions opt;
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool plot = false;
  app.add_option("--config", config, "problem config (TOML subset)");
  app.add_option("--set", opt.overrides, "override a config key, e.g. --set grid.h=0.01")->take_all();
  app.add_option("--out", out, "output directory (overrides output.dir)");
  app.add_option("--seed", seed, "random seed (overrides seed)");
  app.add_option("--threads", threads, "worker threads (default: NONLOCAL_SPECTRA_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--plot", plot, "also write SVG plots");

  auto* plot_cmd = app.add_subcommand("plot", "render a CSV artifact as SVG");
  std::string csv_in, kind = "line", svg_out;
  plot_cmd->add_option("csv", csv_in, "input CSV")->required();
  plot_cmd->add_option("--kind", kind, "line or profile")->check(CLI::IsMember({"line", "profile"}));
  plot_cmd->add_option("-o,--output", svg_out, "output SVG (default: CSV path with .svg)");

  auto* rerun_cmd = app.add_subcommand("rerun", "re-run a command from its manifest.json");
  std::string manifest;
  std::optional<std::string> rerun_out;
  rerun_cmd->add_option("manifest", manifest, "path to manifest.json")->required();
  rerun_cmd->add_option("--out", rerun_out, "output directory (default: the manifest's directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (plot_cmd->parsed()) {
    try {
      const std::filesystem::path in(csv_in);
      const std::filesystem::path target =
          svg_out.empty() ? std::filesystem::path(in).replace_extension(".svg") : std::filesystem::path(svg_out);
      nls::io::plot(in, kind == "line" ? nls::io::PlotKind::Line : nls::io::PlotKind::Profile, target);
      std::cout << "wrote " << target.string() << "\n";
      return 0;
    } catch (const nls::Error& e) {
      std::cerr << e.what() << "\n";
      return e.category() == nls::Category::Config ? 2 : 1;
    }
  }
  if (rerun_cmd->parsed()) {
    std::optional<std::filesystem::path> dir;
    if (rerun_out) dir = *rerun_out;
    return report(nls::app::rerun(manifest, dir, threads));
  }

  if (config.empty()) {
    std::cerr << "ConfigParse: --config is required\n" << app.help();
    return 2;
  }
  opt.config_path = config;
  if (out) opt.out_dir = *out;
  opt.seed = seed;
  opt.threads = threads;
  if (plot) opt.plot = true;
  return report(nls::app::run(opt));
}
