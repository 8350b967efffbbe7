// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include <gsdanchor/cli.hpp>

int main(int argc, char** argv)
{
    return gsdanchor::cli_dispatch({argv + 1, argv + argc}, std::cout, std::cerr);
}
