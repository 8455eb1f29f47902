#include "spacedit/cli.hpp"

#include "spacedit/api.hpp"
#include "spacedit/dataset.hpp"
#include "spacedit/error.hpp"
#include "spacedit/oracle.hpp"
#include "spacedit/persistence.hpp"
#include "spacedit/session.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <thread>

namespace spacedit {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Options {
  // gen-data
  fs::path out_dir;
  SyntheticConfig synthetic;
  // ingest
  fs::path features, labels;
  std::optional<fs::path> splits;
  std::vector<std::size_t> hidden{64, 32};
  std::size_t k_graph = kDefaultGraphNeighbors;
  // shared
  fs::path session;
  std::uint64_t seed = 0;
  // pretrain
  PretrainOptions pretrain;
  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  // edit-replay / export-layout
  fs::path script;
  std::optional<fs::path> out;
  // oracle
  std::string policy;
  double jitter = 0.05;
  // retrain
  RetrainConfig retrain;
  std::string anchor_mode = "live";
  bool unnormalized = false;
  // restore
  std::size_t history_index = 0;
};

void print_json(std::ostream& out, const json& j) { out << j.dump() << '\n'; }

json layout_summary(const Session& s) {
  return {{"cursor", s.cursor()},
          {"history_length", s.history().size()},
          {"pending_edits", s.pending_edits().size()},
          {"checkpoint", s.data().current_checkpoint},
          {"items", s.layout().size()}};
}

void save_to(const Session& s, const Options& o) { save_session(s, o.out.value_or(o.session)); }

int serve(const Options& o, std::ostream& out) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  SessionService service(load_session(o.session), o.session);
  ApiServer server(service);
  const int port = server.bind(o.host, o.port);
  out << "serving " << o.session.string() << " on http://" << o.host << ':' << port << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  waiter.join();
  service.shutdown(true);
  out << "stopped; session saved" << std::endl;
  return 0;
}

int edit_replay(const Options& o, std::ostream& out) {
  auto session = load_session(o.session);
  std::ifstream in(o.script);
  if (!in) throw Error(ErrorCode::not_found, "cannot open " + o.script.string());
  std::string line;
  std::size_t number = 0, edits = 0, retrains = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto parsed = history_from_json_line(line);
      if (parsed.undone) continue;
      if (parsed.entry.kind == HistoryEntry::Kind::retrain) {
        session.retrain(*parsed.entry.retrain);
        ++retrains;
      } else if (session.apply_edits(parsed.entry.transaction)) {
        ++edits;
      }
    } catch (const Error& e) {
      throw Error(e.code(), o.script.filename().string() + " line " + std::to_string(number) + ": " + e.what());
    }
  }
  save_to(session, o);
  auto summary = layout_summary(session);
  summary["replayed_edits"] = edits;
  summary["replayed_retrains"] = retrains;
  print_json(out, summary);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interactive latent-space editing: pretrain, project, edit, retrain", "spacedit"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "write a seeded synthetic dataset as CSV");
  gen->add_option("--out", o.out_dir, "output directory")->required();
  gen->add_option("--n", o.synthetic.n, "item count");
  gen->add_option("--classes", o.synthetic.classes, "class count");
  gen->add_option("--input-dim", o.synthetic.input_dim, "feature count");
  gen->add_option("--overlap", o.synthetic.overlap, "class-pair overlap in [0,1]");
  gen->add_option("--seed", o.synthetic.seed, "random seed");

  auto* ingest = app.add_subcommand("ingest", "create a session from CSV files");
  ingest->add_option("--features", o.features)->required()->check(CLI::ExistingFile);
  ingest->add_option("--labels", o.labels)->required()->check(CLI::ExistingFile);
  ingest->add_option("--splits", o.splits)->check(CLI::ExistingFile);
  ingest->add_option("--session", o.session, "session directory to create")->required();
  ingest->add_option("--hidden", o.hidden, "hidden layer widths; the last is the latent layer")->delimiter(',');
  ingest->add_option("--k-graph", o.k_graph, "Isomap neighbourhood size");
  ingest->add_option("--seed", o.seed, "seed for the split when --splits is absent");

  auto* pretrain = app.add_subcommand("pretrain", "train the classifier with cross-entropy only");
  pretrain->add_option("--session", o.session)->required();
  pretrain->add_option("--epochs", o.pretrain.epochs);
  pretrain->add_option("--seed", o.pretrain.seed);
  pretrain->add_option("--lr", o.pretrain.learning_rate);
  pretrain->add_option("--batch-size", o.pretrain.batch_size);

  auto* serve_cmd = app.add_subcommand("serve", "serve the HTTP/JSON API");
  serve_cmd->add_option("--session", o.session)->required();
  serve_cmd->add_option("--host", o.host);
  serve_cmd->add_option("--port", o.port);

  auto* replay = app.add_subcommand("edit-replay", "apply an edit script or saved history.jsonl");
  replay->add_option("file", o.script)->required()->check(CLI::ExistingFile);
  replay->add_option("--session", o.session)->required();
  replay->add_option("--out", o.out, "write the result here instead of in place");

  auto* oracle = app.add_subcommand("oracle", "apply a scripted edit policy");
  oracle->add_option("policy", o.policy)
      ->required()
      ->check(CLI::IsMember({"to_true_centroid", "separate_mixed", "aggregate_within_class"}));
  oracle->add_option("--session", o.session)->required();
  oracle->add_option("--seed", o.seed);
  oracle->add_option("--jitter", o.jitter, "jitter radius as a fraction of the class radius");

  auto* retrain = app.add_subcommand("retrain", "retrain on pending edits with the composite loss");
  retrain->add_option("--session", o.session)->required();
  retrain->add_option("--epochs", o.retrain.epochs);
  retrain->add_option("--k", o.retrain.k);
  retrain->add_option("--delta", o.retrain.delta);
  retrain->add_option("--w-cls", o.retrain.w_cls);
  retrain->add_option("--w-dis", o.retrain.w_dis);
  retrain->add_option("--lr", o.retrain.learning_rate);
  retrain->add_option("--batch-size", o.retrain.batch_size);
  retrain->add_option("--seed", o.retrain.seed);
  retrain->add_option("--anchor-mode", o.anchor_mode)->check(CLI::IsMember({"live", "frozen"}));
  retrain->add_flag("--unnormalized", o.unnormalized, "use raw inverse-distance anchor weights");
  retrain->add_flag("--allow-empty", o.retrain.allow_empty, "retrain even without pending edits");

  auto* metrics = app.add_subcommand("metrics", "print the metrics report");
  metrics->add_option("--session", o.session)->required();

  auto* export_layout = app.add_subcommand("export-layout", "print or write the current layout");
  export_layout->add_option("--session", o.session)->required();
  export_layout->add_option("--out", o.out, "output file");

  auto* undo = app.add_subcommand("undo", "step the history cursor back");
  undo->add_option("--session", o.session)->required();
  auto* redo = app.add_subcommand("redo", "step the history cursor forward");
  redo->add_option("--session", o.session)->required();
  auto* restore = app.add_subcommand("restore", "move the history cursor to an entry (0 = base)");
  restore->add_option("index", o.history_index)->required();
  restore->add_option("--session", o.session)->required();
  auto* reset = app.add_subcommand("reset", "return to the base layout and clear history");
  reset->add_option("--session", o.session)->required();

  std::vector<const char*> argv;
  argv.push_back("spacedit");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (gen->parsed()) {
      const auto bundle = generate_synthetic(o.synthetic);
      write_dataset_csv(bundle, o.out_dir);
      print_json(out, {{"items", bundle.size()},
                       {"train", bundle.ids_in(Split::train).size()},
                       {"validation", bundle.ids_in(Split::validation).size()},
                       {"test", bundle.ids_in(Split::test).size()},
                       {"out", o.out_dir.string()}});
    } else if (ingest->parsed()) {
      auto bundle = ingest_csv(o.features, o.labels, o.splits, o.seed);
      ModelConfig config;
      config.hidden_dims = o.hidden;
      auto session = Session::create(std::move(bundle), config, o.k_graph);
      save_session(session, o.session);
      print_json(out, {{"items", session.dataset().size()}, {"session", o.session.string()}});
    } else if (pretrain->parsed()) {
      auto session = load_session(o.session);
      session.pretrain(o.pretrain);
      save_session(session, o.session);
      print_json(out, metrics_to_json(session.metrics()));
    } else if (serve_cmd->parsed()) {
      return serve(o, out);
    } else if (replay->parsed()) {
      return edit_replay(o, out);
    } else if (oracle->parsed()) {
      auto session = load_session(o.session);
      auto tx = oracle_edit(session, oracle_policy_from_string(o.policy), {o.seed, o.jitter});
      const auto moved = tx.moves.size();
      session.apply_edits(std::move(tx));
      save_session(session, o.session);
      auto summary = layout_summary(session);
      summary["moved"] = moved;
      print_json(out, summary);
    } else if (retrain->parsed()) {
      auto session = load_session(o.session);
      auto config = o.retrain;
      config.anchor_mode = anchor_mode_from_string(o.anchor_mode);
      config.weighting = o.unnormalized ? AnchorWeighting::unnormalized : AnchorWeighting::normalized;
      const auto result = session.retrain(config);
      save_session(session, o.session);
      auto report = metrics_to_json(session.metrics());
      report["loss_dis"] = result.trace.loss_dis;
      report["warnings"] = result.warnings;
      print_json(out, report);
    } else if (metrics->parsed()) {
      print_json(out, metrics_to_json(load_session(o.session).metrics()));
    } else if (export_layout->parsed()) {
      const auto text = layout_to_json(load_session(o.session).layout()).dump() + "\n";
      if (o.out) {
        std::ofstream f(*o.out, std::ios::trunc);
        if (!f) throw Error(ErrorCode::io, "cannot write " + o.out->string());
        f << text;
      } else {
        out << text;
      }
    } else if (undo->parsed() || redo->parsed() || restore->parsed() || reset->parsed()) {
      auto session = load_session(o.session);
      bool changed = true;
      if (undo->parsed()) changed = session.undo();
      else if (redo->parsed()) changed = session.redo();
      else if (restore->parsed()) session.restore(o.history_index);
      else session.reset();
      save_session(session, o.session);
      auto summary = layout_summary(session);
      summary["changed"] = changed;
      print_json(out, summary);
    }
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace spacedit
