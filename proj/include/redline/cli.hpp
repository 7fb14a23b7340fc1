#pragma once

// Command line front end: serve, scan, check-policy, eval, gen-dataset.
// Exit codes: 0 success / no hits, 1 error or (for scan) redline hits,
// 2 usage errors — so `redline scan` works as a CI redline check.

#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "redline/eval.hpp"
#include "redline/lexical_gate.hpp"
#include "redline/output_scanner.hpp"
#include "redline/server.hpp"

namespace redline {

namespace cli_detail {

inline std::string read_all(std::istream& in) {
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline int run_scan(const std::string& text, const Policy& policy,
                    std::ostream& out) {
  // full family set plus crisis: the CI check wants everything
  std::string normalized = normalize(text);
  auto spans = match_families(normalized, policy, /*include_output_scope=*/true);
  if (spans.empty()) {
    out << "clean: no redline hits\n";
    return 0;
  }
  out << "normalized: " << normalized << "\n";
  for (const auto& s : spans)
    out << s.family << "[" << s.pattern_index << "] @ [" << s.start << ","
        << s.end << "): \"" << s.surface << "\"\n";
  out << spans.size() << " hit(s)\n";
  return 1;
}

inline int run_check_policy(const std::string& path, std::ostream& out,
                            std::ostream& err) {
  try {
    Policy policy = load_policy_file(path);
    auto warnings = validate_policy(policy.config);
    out << "policy ok: version " << policy.config.policy_version << ", "
        << policy.config.denylist_patterns.size() << " families, "
        << policy.config.crisis_patterns.size() << " crisis patterns\n";
    for (const auto& w : warnings)
      out << "warning [" << w.code << "]: " << w.message << "\n";
    return 0;
  } catch (const PolicyError& e) {
    err << "policy rejected: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cli_detail

inline int run_cli(std::vector<std::string> args, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"redline: fail-closed safety gateway for health-adjacent chat"};
  app.require_subcommand(1);

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP gateway");
  std::string config_path;
  ServerConfig server_config;
  serve->add_option("--config", config_path, "JSON config file");
  serve->add_option("--bind", server_config.bind, "bind address");
  serve->add_option("--port", server_config.port, "listen port (0 = ephemeral)");
  serve->add_option("--policy", server_config.policy_path,
                    "policy file (default: built-in pack)");
  serve->add_option("--backend", server_config.backend,
                    "backend descriptor (mock:<path> or http:<url>[#model])");
  serve->add_option("--pattern", server_config.default_pattern,
                    "default deployment pattern");
  serve->add_option("--audit", server_config.audit_path, "audit sink path");
  serve->add_option("--admin-token", server_config.admin_token,
                    "bearer token for the admin endpoints");

  // scan
  auto* scan = app.add_subcommand(
      "scan", "scan text against the redline families (nonzero exit on hits)");
  std::string scan_text, scan_file, scan_policy;
  scan->add_option("--text", scan_text, "text to scan");
  scan->add_option("--file", scan_file, "file to scan");
  scan->add_option("--policy", scan_policy, "policy file (default: built-in)");

  // check-policy
  auto* check = app.add_subcommand("check-policy", "load and lint a policy file");
  std::string check_path;
  check->add_option("file", check_path, "policy file")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "run the pattern comparison harness");
  std::string eval_dataset, eval_backend, eval_policy, eval_report, eval_audit;
  std::string eval_patterns = "A,B,C,D,E,F";
  eval->add_option("--dataset", eval_dataset, "JSONL prompt dataset")->required();
  eval->add_option("--backend", eval_backend, "backend descriptor")->required();
  eval->add_option("--patterns", eval_patterns,
                   "comma-separated pattern list (stacks like D+E allowed)");
  eval->add_option("--policy", eval_policy, "policy file (default: built-in)");
  eval->add_option("--report", eval_report, "write the JSON report here");
  eval->add_option("--audit", eval_audit, "audit sink for the run");

  // gen-dataset
  auto* gen = app.add_subcommand("gen-dataset",
                                 "generate a labeled dataset via a backend");
  std::string gen_out, gen_backend;
  int gen_malicious = 50, gen_safe = 50;
  gen->add_option("--out", gen_out, "output JSONL path")->required();
  gen->add_option("--backend", gen_backend, "backend descriptor")->required();
  gen->add_option("--malicious", gen_malicious, "malicious prompt count");
  gen->add_option("--safe", gen_safe, "safe prompt count");

  std::vector<const char*> argv;
  argv.push_back("redline");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*serve) {
      if (!config_path.empty()) {
        ServerConfig from_file = ServerConfig::from_file(config_path);
        // explicit flags win over the file
        if (serve->count("--bind") == 0) server_config.bind = from_file.bind;
        if (serve->count("--port") == 0) server_config.port = from_file.port;
        if (serve->count("--policy") == 0)
          server_config.policy_path = from_file.policy_path;
        if (serve->count("--backend") == 0)
          server_config.backend = from_file.backend;
        if (serve->count("--pattern") == 0)
          server_config.default_pattern = from_file.default_pattern;
        if (serve->count("--audit") == 0)
          server_config.audit_path = from_file.audit_path;
        if (serve->count("--admin-token") == 0)
          server_config.admin_token = from_file.admin_token;
      }
      server_config.apply_env();
      GatewayServer server(std::move(server_config));
      out << "listening" << std::endl;
      server.run();
      return 0;
    }

    if (*scan) {
      if (scan_text.empty() == scan_file.empty()) {
        err << "scan: exactly one of --text or --file is required\n";
        return 2;
      }
      std::string text = scan_text;
      if (!scan_file.empty()) {
        std::ifstream in(scan_file);
        if (!in) {
          err << "scan: cannot read " << scan_file << "\n";
          return 1;
        }
        text = cli_detail::read_all(in);
      }
      Policy policy = load_policy_or_default(scan_policy);
      return cli_detail::run_scan(text, policy, out);
    }

    if (*check) return cli_detail::run_check_policy(check_path, out, err);

    if (*eval) {
      Policy policy = load_policy_or_default(eval_policy);
      auto dataset = load_dataset(eval_dataset);
      auto backend = make_backend(eval_backend);
      std::vector<PatternRun> runs;
      std::stringstream patterns(eval_patterns);
      std::string spec;
      EvalOptions options;
      options.audit_path = eval_audit;
      while (std::getline(patterns, spec, ',')) {
        if (spec.empty()) continue;
        runs.push_back(run_pattern(DeploymentPattern::parse(spec), dataset,
                                   backend, policy, options));
      }
      EvalReport report = compute_report(runs);
      out << render_report(report);
      if (!eval_report.empty()) {
        std::ofstream rf(eval_report, std::ios::trunc);
        if (!rf) {
          err << "eval: cannot write " << eval_report << "\n";
          return 1;
        }
        rf << to_json(report).dump(2) << "\n";
      }
      return 0;
    }

    if (*gen) {
      auto backend = make_backend(gen_backend);
      auto prompts =
          generate_dataset(*backend, {.malicious = gen_malicious, .safe = gen_safe});
      write_dataset_file(prompts, gen_out);
      out << "wrote " << prompts.size() << " prompts to " << gen_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

inline int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(std::move(args), std::cout, std::cerr);
}

}  // namespace redline
