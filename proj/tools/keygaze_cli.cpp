#include "keygaze/cli/commands.hpp"

int main(int argc, char** argv) { return keygaze::cli::dispatch(argc, argv); }
