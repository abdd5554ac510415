#include "ddpq/io.hpp"

#include <array>

namespace ddpq {

namespace {

// serial, age, systolic, diastolic
constexpr std::array<BpRow, 38> kRows{{
    {2, 21, 120, 88},   {3, 60, 180, 100},  {4, 38, 110, 90},   {5, 19, 100, 70},   {6, 50, 170, 100},
    {7, 32, 130, 84},   {8, 41, 120, 80},   {9, 36, 140, 84},   {10, 57, 170, 106}, {11, 52, 110, 80},
    {12, 19, 120, 80},  {13, 17, 110, 70},  {14, 16, 120, 80},  {15, 67, 160, 90},  {16, 42, 130, 90},
    {17, 44, 140, 90},  {18, 56, 170, 100}, {19, 32, 150, 94},  {20, 21, 140, 94},  {22, 76, 160, 90},
    {23, 37, 110, 80},  {24, 48, 130, 90},  {25, 40, 160, 112}, {26, 36, 150, 90},  {27, 39, 140, 100},
    {28, 38, 110, 74},  {29, 16, 110, 70},  {30, 48, 130, 100}, {31, 22, 120, 80},  {32, 30, 110, 70},
    {33, 19, 120, 80},  {34, 39, 124, 84},  {35, 38, 130, 94},  {36, 45, 120, 84},  {37, 22, 130, 80},
    {38, 20, 120, 86},  {39, 18, 120, 80},  {40, 31, 112, 80},
}};

}  // namespace

std::span<const BpRow> bp_table() { return kRows; }

}  // namespace ddpq
