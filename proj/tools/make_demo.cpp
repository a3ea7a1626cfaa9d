// Writes the synthetic demo inputs: a Kaggle-schema trip file whose endpoints
// cluster on downtown Porto, and one point_list trajectory across the center.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <fmt/format.h>

#include "geostory/testing/harness.hpp"

namespace gs = geostory;

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "data";
  std::filesystem::create_directories(dir);

  gs::testing::SyntheticSpec spec;
  spec.seed = 2013;
  spec.n_trajectories = 2000;
  spec.endpoint_clusters = gs::testing::porto_clusters();
  const auto ds = gs::testing::generate_dataset(spec);
  {
    std::ofstream out(dir / "porto_demo_trips.csv", std::ios::binary | std::ios::trunc);
    gs::testing::write_kaggle_csv(out, ds, 25);
  }

  // Boavista -> Aliados -> São Bento -> Ribeira -> Campanhã.
  const gs::GeoPoint waypoints[] = {{-8.6291, 41.1579}, {-8.6160, 41.1530}, {-8.6110, 41.1486},
                                    {-8.6106, 41.1456}, {-8.6136, 41.1406}, {-8.6000, 41.1440},
                                    {-8.5855, 41.1487}};
  const auto trip = gs::testing::trajectory_through("downtown", waypoints, 12);
  {
    std::ofstream out(dir / "porto_trip.csv", std::ios::binary | std::ios::trunc);
    gs::write_point_list(out, trip);
  }
  fmt::print("wrote {} and {}\n", (dir / "porto_demo_trips.csv").string(), (dir / "porto_trip.csv").string());
  return 0;
}
