#include <csignal>
#include <string>
#include <vector>

#include <goldsift/cli.hpp>

namespace {

void handle_signal(int) { goldsift::cli::g_interrupted.store(true); }

}  // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);

    std::vector<std::string> args(argv + 1, argv + argc);
    return goldsift::cli::run_command(std::move(args));
}
