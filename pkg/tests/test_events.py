from unittest import TestCase

from trafficipa import *


class EventKindTest(TestCase):
    def test_identifiers(self):
        self.assertEqual(EventKind.ARRIVAL.identifier, 'Gamma')
        self.assertEqual(EventKind.THRESHOLD_DOWN.identifier, 'Zbar')
        self.assertEqual(str(EventKind.G2R), 'G2R')

    def test_from_str(self):
        for kind in EventKind:
            self.assertEqual(EventKind.from_str(kind.identifier), kind)

    def test_from_str_unknown(self):
        with self.assertRaises(ValueError) as context:
            EventKind.from_str('X')


class EventRecordTest(TestCase):
    def record(self, **kwargs):
        return EventRecord(EventKind.JOIN, 12.5, 2, (0, 3, 0, 0, 4), (0, 7, 0, 0, 0), (True, True, False, False), **kwargs)

    def test_init(self):
        record = self.record(burst = 1, k = 2, final = True, speed = 1.0)
        self.assertEqual(record.kind, EventKind.JOIN)
        self.assertEqual(record.time, 12.5)
        self.assertEqual(record.queue, 2)
        self.assertEqual(record.x_before, (0, 3, 0, 0, 4))
        self.assertEqual(record.x_after, (0, 7, 0, 0, 0))
        self.assertTrue(record.green(1))
        self.assertFalse(record.green(4))
        self.assertEqual(record.burst, 1)
        self.assertEqual(record.k, 2)
        self.assertTrue(record.final)
        self.assertFalse(record.induced)
        self.assertEqual(str(record), '12.500000 J_2 queue=2')

    def test_init_wrong_kind(self):
        with self.assertRaises(TypeError) as context:
            EventRecord('J', 0.0, 2, (0,) * 5, (0,) * 5, (True, True, False, False))

    def test_init_unknown_queue(self):
        with self.assertRaises(ValueError) as context:
            EventRecord(EventKind.ARRIVAL, 0.0, 5, (0,) * 5, (0,) * 5, (True, True, False, False))
