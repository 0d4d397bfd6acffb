#include "dualsr/cli.hpp"

int main(int argc, char** argv)
{
    return dualsr::cli::run_cli(argc, argv);
}
