// Writes the synthetic tabular fixtures under tests/data.
//   mixture_500.csv: x1..x3 ~ N(0, 1); y drawn from component i with
//   probability theta_i, component i being N(beta_i x_i + b_i, sigma^2).
//   tiny_12.csv: 12 rows with a categorical column and one missing value.

#include "cdfreg/io.hpp"
#include "cdfreg/rng.hpp"

#include <array>
#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    const std::string dir = argc > 1 ? argv[1] : "tests/data";
    constexpr std::array<double, 3> theta{0.5, 0.3, 0.2};
    constexpr std::array<double, 3> beta{2.0, -1.5, 1.0};
    constexpr std::array<double, 3> shift{0.0, 1.0, -1.0};
    constexpr double sigma = 0.5;

    cdfreg::Rng rng(20240601, {1});
    std::ofstream mix(dir + "/mixture_500.csv");
    mix << "x1,x2,x3,y\n";
    for (int r = 0; r < 500; ++r) {
        std::array<double, 3> x{rng.normal(), rng.normal(), rng.normal()};
        const double u = rng.uniform01();
        const int k = u < theta[0] ? 0 : u < theta[0] + theta[1] ? 1 : 2;
        const double y = beta[k] * x[k] + shift[k] + sigma * rng.normal();
        mix << cdfreg::format_double(x[0]) << "," << cdfreg::format_double(x[1]) << "," << cdfreg::format_double(x[2])
            << "," << cdfreg::format_double(y) << "\n";
    }

    cdfreg::Rng tiny_rng(7, {2});
    std::ofstream tiny(dir + "/tiny_12.csv");
    tiny << "age,income,region,y\n";
    const char* regions[] = {"north", "south", "east"};
    for (int r = 0; r < 13; ++r) {
        const double age = 20.0 + r * 3.0;
        const double income = 30.0 + 2.0 * r + 5.0 * tiny_rng.normal();
        const double y = 0.1 * age + 0.05 * income + tiny_rng.normal();
        tiny << age << "," << (r == 5 ? std::string("NA") : cdfreg::format_double(income)) << "," << regions[r % 3] << ","
             << cdfreg::format_double(y) << "\n";
    }
    std::cout << "wrote " << dir << "/mixture_500.csv and " << dir << "/tiny_12.csv\n";
}
