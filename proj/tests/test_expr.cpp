#include "turnpike/expr.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace turnpike;

TEST(Expr, UnaryMinus)
{
    EXPECT_DOUBLE_EQ(parse_coefficient("-y")(2.0), -2.0);
}

TEST(Expr, GaussianAtZero)
{
    EXPECT_DOUBLE_EQ(parse_coefficient("exp(-y^2)")(0.0), 1.0);
}

TEST(Expr, TrailingOperatorReportsOffset)
{
    try
    {
        parse_coefficient("y +");
        FAIL() << "expected a syntax error";
    }
    catch (SyntaxError const& e)
    {
        EXPECT_EQ(e.offset(), 3u);
    }
}

TEST(Expr, Arithmetic)
{
    EXPECT_DOUBLE_EQ(eval_coefficient(parse_coefficient("2*y^2 - 1"), 1.5), 3.5);
    EXPECT_DOUBLE_EQ(parse_coefficient("2+3*4")(0.0), 14.0);
    EXPECT_DOUBLE_EQ(parse_coefficient("-y^2")(2.0), -4.0);
    EXPECT_DOUBLE_EQ(parse_coefficient("2^3^2")(0.0), 512.0);
    EXPECT_DOUBLE_EQ(parse_coefficient("8/4/2")(0.0), 1.0);
    EXPECT_DOUBLE_EQ(parse_coefficient("1-2-3")(0.0), -4.0);
    EXPECT_DOUBLE_EQ(parse_coefficient("2^-1")(0.0), 0.5);
    EXPECT_DOUBLE_EQ(parse_coefficient("abs(y) + sqrt(4) + tanh(0) + log(exp(1))")(-3.0), 6.0);
    EXPECT_DOUBLE_EQ(parse_coefficient("1.5e2 + .5")(0.0), 150.5);
    EXPECT_DOUBLE_EQ(parse_coefficient("(-2)^3")(0.0), -8.0);
}

TEST(Expr, DomainErrors)
{
    Expr const lg = parse_coefficient("log(y)");
    EXPECT_THROW(lg(-1.0), DomainError);
    try
    {
        parse_coefficient("1/(1-y)")(1.0);
        FAIL() << "expected a domain error";
    }
    catch (DomainError const& e)
    {
        EXPECT_EQ(e.subexpression(), "1/(1-y)");
        EXPECT_NE(std::string(e.what()).find("division by zero"), std::string::npos);
    }
    EXPECT_THROW(parse_coefficient("sqrt(y)")(-1.0), DomainError);
    EXPECT_THROW(parse_coefficient("y^0.5")(-1.0), DomainError);
    EXPECT_THROW(parse_coefficient("exp(y)")(1000.0), DomainError);
}

TEST(Expr, SyntaxErrors)
{
    EXPECT_THROW(parse_coefficient(""), SyntaxError);
    EXPECT_THROW(parse_coefficient("   "), SyntaxError);
    EXPECT_THROW(parse_coefficient("2y"), SyntaxError);
    EXPECT_THROW(parse_coefficient("foo(y)"), SyntaxError);
    EXPECT_THROW(parse_coefficient("x"), SyntaxError);
    EXPECT_THROW(parse_coefficient("(y"), SyntaxError);
    EXPECT_THROW(parse_coefficient("y)"), SyntaxError);
    EXPECT_THROW(parse_coefficient("exp y"), SyntaxError);
    try
    {
        parse_coefficient("1 + zeta");
        FAIL();
    }
    catch (SyntaxError const& e)
    {
        EXPECT_EQ(e.offset(), 4u);
        EXPECT_NE(std::string(e.what()).find("unknown identifier"), std::string::npos);
    }
}

TEST(Expr, VariableIsIdentity)
{
    Expr const y = parse_coefficient("y");
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i)
    {
        double const t = u(gen);
        EXPECT_EQ(y(t), t);
    }
}

namespace {

Expr random_expr(std::mt19937_64& gen, int depth)
{
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 8);
    switch (pick(gen))
    {
        case 0: return Expr::number(std::uniform_int_distribution<int>(0, 40)(gen) / 8.0);
        case 1: return Expr::variable();
        case 2: return Expr::negate(random_expr(gen, depth - 1));
        case 3: return Expr::binary(Expr::Kind::Add, random_expr(gen, depth - 1), random_expr(gen, depth - 1));
        case 4: return Expr::binary(Expr::Kind::Sub, random_expr(gen, depth - 1), random_expr(gen, depth - 1));
        case 5: return Expr::binary(Expr::Kind::Mul, random_expr(gen, depth - 1), random_expr(gen, depth - 1));
        case 6: return Expr::binary(Expr::Kind::Div, random_expr(gen, depth - 1), random_expr(gen, depth - 1));
        case 7: return Expr::binary(Expr::Kind::Pow, random_expr(gen, depth - 1), random_expr(gen, depth - 1));
        default: {
            auto fn = static_cast<Expr::Function>(std::uniform_int_distribution<int>(0, 4)(gen));
            return Expr::call(fn, random_expr(gen, depth - 1));
        }
    }
}

}  // namespace

TEST(Expr, PrintParseRoundTrip)
{
    std::mt19937_64 gen(20261016);
    for (int i = 0; i < 2000; ++i)
    {
        Expr const e = random_expr(gen, 5);
        std::string const text = e.to_string();
        Expr const back = parse_coefficient(text);
        ASSERT_TRUE(back == e) << text << " reparsed as " << back.to_string();
        EXPECT_EQ(back.to_string(), text);
    }
}

TEST(Expr, PrintIsMinimal)
{
    EXPECT_EQ(parse_coefficient("((y))+(2*(3))").to_string(), "y+2*3");
    EXPECT_EQ(parse_coefficient("(y+1)*(y-1)").to_string(), "(y+1)*(y-1)");
    EXPECT_EQ(parse_coefficient("-(y^2)").to_string(), "-y^2");
    EXPECT_EQ(parse_coefficient("(-y)^2").to_string(), "(-y)^2");
    EXPECT_EQ(parse_coefficient("(2^3)^2").to_string(), "(2^3)^2");
    EXPECT_EQ(parse_coefficient("y-(1-y)").to_string(), "y-(1-y)");
}
