#include <iostream>

#include "CLI11.hpp"
#include "wf/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"non-rigid RGB-D volumetric reconstruction"};
    app.require_subcommand(1);

    wf::RunOptions run_opts;
    auto* reconstruct = app.add_subcommand("reconstruct", "run the per-frame pipeline");
    reconstruct->add_option("--input", run_opts.input_dir, "frame directory")->required();
    reconstruct->add_option("--config", run_opts.config_path, "key=value config file");
    reconstruct->add_option("--out", run_opts.output_dir, "output directory")->required();
    reconstruct->add_flag("--save-per-frame", run_opts.save_per_frame,
                          "write a deformed mesh per frame");

    std::string spec_path, synth_out;
    auto* synth = app.add_subcommand("synth", "render a synthetic RGB-D sequence");
    synth->add_option("--spec", spec_path, "scene spec file")->required();
    synth->add_option("--out", synth_out, "output directory")->required();

    std::string recon_dir, truth_dir, eval_out;
    auto* eval = app.add_subcommand("eval", "compare a reconstruction to ground truth");
    eval->add_option("--recon", recon_dir, "reconstruction directory")->required();
    eval->add_option("--truth", truth_dir, "ground truth directory")->required();
    eval->add_option("--out", eval_out, "report file (JSON)")->required();

    std::string volume_path, mesh_out;
    auto* export_mesh = app.add_subcommand("export-mesh", "extract the isosurface of a volume");
    export_mesh->add_option("--volume", volume_path, "volume snapshot")->required();
    export_mesh->add_option("--out", mesh_out, "output PLY")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (reconstruct->parsed())
            wf::run_reconstruct(run_opts);
        else if (synth->parsed())
            wf::run_synth(spec_path, synth_out);
        else if (eval->parsed())
            wf::run_eval(recon_dir, truth_dir, eval_out);
        else if (export_mesh->parsed())
            wf::run_export_mesh(volume_path, mesh_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
