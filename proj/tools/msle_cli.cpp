#include <msle/harness.hpp>

int main(int argc, char** argv) {
  return msle::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
