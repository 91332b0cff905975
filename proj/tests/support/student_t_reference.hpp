#pragma once

// Student-t CDF reference values P(T <= t), evaluated with mpmath at 40
// significant digits through the regularized incomplete beta function.

namespace gridres::testing {

struct StudentTPoint {
    double t;
    int df;
    double cdf;
};

inline constexpr StudentTPoint kStudentTReference[] = {
    {-3.25, 1, 0.095015160939179844225},
    {0.0, 1, 0.5},
    {1.645, 1, 0.82613593114807070549},
    {-1.0, 2, 0.21132486540518711775},
    {2.75, 2, 0.94464864589994378478},
    {4.0, 2, 0.97140452079103168293},
    {-2.0, 3, 0.069662984279421588424},
    {-1.0, 3, 0.19550110947788532096},
    {0.0, 3, 0.5},
    {2.2, 3, 0.94241402401176464356},
    {-7.5, 4, 0.00084543576616114884987},
    {0.0, 4, 0.5},
    {0.25, 4, 0.59254899427040938654},
    {0.8, 4, 0.76573643221888457427},
    {4.0, 4, 0.99193495504995373321},
    {6.0, 4, 0.99805873147651974479},
    {-7.5, 5, 0.00033312662448309019821},
    {-1.0, 5, 0.1816087338245613128},
    {0.0, 5, 0.5},
    {4.0, 5, 0.9948382922595842731},
    {-7.5, 7, 0.000068651915357639015914},
    {0.25, 7, 0.59511720707607409032},
    {1.645, 7, 0.92801641718562644967},
    {4.0, 7, 0.99740504332535159419},
    {-7.5, 10, 0.000010313985480590915518},
    {-2.0, 10, 0.036694017385370182809},
    {1.645, 10, 0.93450246473532424217},
    {2.75, 10, 0.98976087688922935441},
    {6.0, 10, 0.9999339455698226072},
    {-2.0, 15, 0.031972503642360101426},
    {0.0, 15, 0.5},
    {0.8, 15, 0.78190103041865565327},
    {-1.0, 20, 0.16462828858585453213},
    {0.25, 20, 0.59743134151989769158},
    {0.8, 20, 0.78344456087117632958},
    {0.8, 30, 0.78499979510789616623},
    {1.96, 30, 0.97032884355197476184},
    {2.2, 30, 0.98217578000158211204},
    {12.0, 30, 0.99999999999972099073},
    {0.0, 60, 0.5},
    {0.25, 60, 0.59827932424668169656},
    {4.0, 60, 0.99991183880646801294},
    {2.2, 120, 0.98513880108738169417},
    {2.75, 120, 0.99655883694227823989},
    {4.0, 120, 0.99994502807868789173},
    {-3.25, 500, 0.00061589197015414303237},
    {-0.3, 500, 0.38215091797540350437},
    {0.0, 500, 0.5},
    {0.8, 500, 0.78795464378073337564},
    {6.0, 500, 0.99999999810477883076},
};

}  // namespace gridres::testing
