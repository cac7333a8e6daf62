"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.
"""

import unittest

from purikit.attack import AttackMethod, NormKind
from purikit.errors import CLUSTER_COUNT, MISSING_ARTIFACT, CONFIG_BAD_VALUE
from purikit.parallel import ordered_map
from purikit.utils import (
    PurikitError,
    BadBundle,
    LogFunction,
    check,
    current_fn_name,
    floatMaxString,
    getEnumTypeFromString,
)


class UtilsTestCase(unittest.TestCase):
    def setUp(self):
        pass

    def tearDown(self):
        pass

    def test_error_from_pair(self):
        ex = PurikitError.fromPair(MISSING_ARTIFACT, "'srd'")
        self.assertEqual(ex.code, 301)
        self.assertEqual(ex.category, "dependency")
        self.assertEqual(ex.exitStatus, 3)
        self.assertIn("'srd'", str(ex))

        ex = PurikitError.fromPair(CONFIG_BAD_VALUE, "net.epochs")
        self.assertEqual(ex.exitStatus, 2)

    def test_bad_bundle_is_purikit_error(self):
        self.assertTrue(issubclass(BadBundle, PurikitError))

    def test_check(self):
        check(True, CLUSTER_COUNT, "never raised")
        with self.assertRaises(PurikitError) as ctx:
            check(False, CLUSTER_COUNT, "psi 5 > 3")
        self.assertEqual(ctx.exception.code, CLUSTER_COUNT.code())
        self.assertEqual(ctx.exception.text, "psi 5 > 3")

    def test_float_max_string(self):
        self.assertEqual(floatMaxString(None), "")
        self.assertEqual(floatMaxString(float("inf")), "inf")
        self.assertEqual(floatMaxString(0.5), "0.5000")
        self.assertEqual(floatMaxString(0.123456, 2), "0.12")

    def test_enum_lookup(self):
        self.assertEqual(getEnumTypeFromString(AttackMethod, "bim"), AttackMethod.BIM)
        self.assertEqual(getEnumTypeFromString(NormKind, "linf"), NormKind.LINF)
        with self.assertRaises(ValueError):
            getEnumTypeFromString(AttackMethod, "cw")

    def test_log_function_keeps_identity(self):
        @LogFunction("test", 10)
        def scaled(a, b=2):
            """doc"""
            return a * b

        self.assertEqual(scaled(3), 6)
        self.assertEqual(scaled(3, b=4), 12)
        self.assertEqual(scaled.__name__, "scaled")
        self.assertEqual(scaled.__doc__, "doc")

    def test_current_fn_name(self):
        self.assertEqual(current_fn_name(), "test_current_fn_name")

    def test_ordered_map(self):
        items = list(range(20))
        self.assertEqual(ordered_map(lambda i: i * i, items, 1), [i * i for i in items])
        self.assertEqual(ordered_map(lambda i: i * i, items, 4), [i * i for i in items])
        self.assertEqual(ordered_map(lambda i: i, [], 4), [])

    def test_ordered_map_propagates(self):
        def boom(i):
            if i == 3:
                raise RuntimeError("worker failed")
            return i

        with self.assertRaises(RuntimeError):
            ordered_map(boom, range(6), 3)


if "__main__" == __name__:
    unittest.main()
