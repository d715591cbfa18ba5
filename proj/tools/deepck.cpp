#include <iostream>
#include <string_view>

#include "cli/common.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kRuntime = 4 };

std::vector<deepck::cli::Command> all_commands() {
  using namespace deepck::cli;
  std::vector<Command> out;
  for (auto group : {depth_commands(), corpus_commands(), model_commands(), kb_commands()})
    out.insert(out.end(), group.begin(), group.end());
  return out;
}

void usage(std::ostream& out, const std::vector<deepck::cli::Command>& commands) {
  out << "usage: deepck <command> [options]\n\ncommands:\n";
  for (const auto& c : commands) out << "  " << c.name << std::string(18 - std::min<std::size_t>(17, c.name.size()), ' ') << c.help << '\n';
  out << "\nRun 'deepck <command> --help' for the options of one command.\n";
}

}  // namespace

int main(int argc, char** argv) {
  const auto commands = all_commands();
  if (argc < 2) {
    usage(std::cerr, commands);
    return kConfig;
  }
  const std::string_view name = argv[1];
  if (name == "-h" || name == "--help" || name == "help") {
    usage(std::cout, commands);
    return kOk;
  }
  const auto it = std::find_if(commands.begin(), commands.end(), [&](const auto& c) { return c.name == name; });
  if (it == commands.end()) {
    std::cerr << "deepck: unknown command '" << name << "'\n";
    usage(std::cerr, commands);
    return kConfig;
  }

  CLI::App app(it->help, "deepck " + it->name);
  std::function<void()> run;
  it->setup(app, run);
  try {
    app.parse(argc - 1, argv + 1);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    run();
    return kOk;
  } catch (const deepck::ConfigError& e) {
    std::cerr << "deepck " << it->name << ": configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const deepck::ParseError& e) {
    std::cerr << "deepck " << it->name << ": data error: " << e.what() << '\n';
    return kData;
  } catch (const deepck::InvalidArgument& e) {
    std::cerr << "deepck " << it->name << ": data error: " << e.what() << '\n';
    return kData;
  } catch (const deepck::SaturationError& e) {
    std::cerr << "deepck " << it->name << ": data error: " << e.what() << '\n';
    return kData;
  } catch (const deepck::AssemblyError& e) {
    std::cerr << "deepck " << it->name << ": data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "deepck " << it->name << ": error: " << e.what() << '\n';
    return kRuntime;
  }
}
